#include <qpt/boys.h>

#include <cmath>
#include <fmt/core.h>
#include <numbers>
#include <stdexcept>

namespace qpt {

namespace {

constexpr double kSwitch = 30.0;

void check_args(int m_max, double t) {
    if (m_max < 0 || m_max > kBoysMaxOrder)
        throw std::invalid_argument(fmt::format("boys: order {} outside [0, {}]", m_max,
                                                kBoysMaxOrder));
    if (!(t >= 0.0)) throw std::invalid_argument(fmt::format("boys: negative argument {}", t));
}

} // namespace

void boys_array(int m_max, double t, std::span<double> out) {
    check_args(m_max, t);
    if (out.size() <= static_cast<size_t>(m_max))
        throw std::invalid_argument("boys: output span too small");

    const double et = std::exp(-t);
    if (t < kSwitch) {
        // series for the highest order, then downward recursion
        double term = 1.0 / (2 * m_max + 1);
        double sum = term;
        for (int k = 0; k < 400; ++k) {
            term *= 2.0 * t / (2 * m_max + 2 * k + 3);
            sum += term;
            if (term < 1e-17 * sum) break;
        }
        out[m_max] = et * sum;
        for (int m = m_max; m > 0; --m) out[m - 1] = (2.0 * t * out[m] + et) / (2 * m - 1);
    } else {
        // upward recursion from the closed form of F_0 is stable for t > m_max
        out[0] = 0.5 * std::sqrt(std::numbers::pi / t) * std::erf(std::sqrt(t));
        for (int m = 0; m < m_max; ++m) out[m + 1] = ((2 * m + 1) * out[m] - et) / (2.0 * t);
    }
}

double boys(int m, double t) {
    double buf[kBoysMaxOrder + 1];
    boys_array(m, t, buf);
    return buf[m];
}

} // namespace qpt
