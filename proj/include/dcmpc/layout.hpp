#ifndef DCMPC_LAYOUT_HPP
#define DCMPC_LAYOUT_HPP

#include <dcmpc/errors.hpp>

#include <cstddef>

namespace dcmpc {

/// Maps the window decision variables onto contiguous ids:
/// x(t) = log Tc(t), then y_j(t) = log m_j(t) cluster by cluster, then Gamma.
struct VariableLayout {
    long tau = 0;
    int horizon = 0;  ///< t_h; the window covers tau..tau+horizon
    int clusters = 1;

    int steps() const noexcept { return horizon + 1; }

    int size() const noexcept { return steps() * (clusters + 1) + 1; }

    int x(long t) const {
        check_time(t);
        return static_cast<int>(t - tau);
    }

    int y(int j, long t) const {
        check_time(t);
        if (j < 0 || j >= clusters) {
            throw UsageError("cluster index out of range");
        }
        return steps() * (1 + j) + static_cast<int>(t - tau);
    }

    int gamma() const noexcept { return steps() * (clusters + 1); }

private:
    void check_time(long t) const {
        if (t < tau || t > tau + horizon) {
            throw UsageError("time index outside the window");
        }
    }
};

}  // namespace dcmpc

#endif  // DCMPC_LAYOUT_HPP
