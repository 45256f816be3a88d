#ifndef HSPI_FFT_HPP
#define HSPI_FFT_HPP

#include "hspi/types.hpp"

namespace hspi {

/// Centered 2D DFT of an odd-sided square grid: index c = (side-1)/2 is the
/// origin in both domains, F(k) = sum_r f(r) exp(-2 pi i (k-c).(r-c) / side).
ComplexGrid fft2_centered(const ComplexGrid& in);

/// Inverse of fft2_centered, including the 1/side^2 normalisation.
ComplexGrid ifft2_centered(const ComplexGrid& in);

inline ComplexGrid fft2_centered(const RealGrid& in)
{
    return fft2_centered(ComplexGrid(in.cast<Complex>()));
}

} // namespace hspi

#endif // HSPI_FFT_HPP
