#ifndef HSPI_PARALLEL_HPP
#define HSPI_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace hspi {

/// Worker count used by all parallel loops. 0 or 1 runs inline.
void set_num_threads(int n);
int num_threads();

/// Runs body(begin, end) over disjoint contiguous chunks of [0, n).
/// Callers must only write to locations owned by their index range so that
/// results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace hspi

#endif // HSPI_PARALLEL_HPP
