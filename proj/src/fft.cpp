#include "hspi/fft.hpp"

#include "hspi/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <vector>

namespace hspi {

namespace {

// Rolls every row and column by `shift` (mod side).
ComplexGrid roll(const ComplexGrid& in, Eigen::Index shift)
{
    const Eigen::Index n = in.rows();
    ComplexGrid out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index oi = ((i + shift) % n + n) % n;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index oj = ((j + shift) % n + n) % n;
            out(oi, oj) = in(i, j);
        }
    }
    return out;
}

ComplexGrid transform(const ComplexGrid& in, bool inverse)
{
    if (in.rows() != in.cols() || in.rows() % 2 == 0)
        throw ConfigError("centered FFT requires an odd-sided square grid");
    const Eigen::Index n = in.rows();
    const Eigen::Index c = (n - 1) / 2;

    ComplexGrid work = roll(in, -c);
    Eigen::FFT<double> fft;
    std::vector<Complex> src(static_cast<std::size_t>(n));
    std::vector<Complex> dst;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j)
            src[static_cast<std::size_t>(j)] = work(i, j);
        inverse ? fft.inv(dst, src) : fft.fwd(dst, src);
        for (Eigen::Index j = 0; j < n; ++j)
            work(i, j) = dst[static_cast<std::size_t>(j)];
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i)
            src[static_cast<std::size_t>(i)] = work(i, j);
        inverse ? fft.inv(dst, src) : fft.fwd(dst, src);
        for (Eigen::Index i = 0; i < n; ++i)
            work(i, j) = dst[static_cast<std::size_t>(i)];
    }
    return roll(work, c);
}

} // namespace

ComplexGrid fft2_centered(const ComplexGrid& in) { return transform(in, false); }

ComplexGrid ifft2_centered(const ComplexGrid& in) { return transform(in, true); }

} // namespace hspi
