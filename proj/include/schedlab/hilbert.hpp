#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace schedlab {

// Hilbert curve index -> (x, y) on a 2^order x 2^order grid. Iterative
// bit-interleaving construction; consecutive indices land on adjacent
// cells and the map is a bijection onto the grid.
inline std::pair<int, int> hilbert_index_to_xy(long d, int order) {
    if (order < 0 || order > 30)
        throw std::invalid_argument("hilbert_index_to_xy: order out of range");
    const long n = 1L << order;
    if (d < 0 || d >= n * n)
        throw std::out_of_range("hilbert_index_to_xy: index " + std::to_string(d) +
                                " outside 4^" + std::to_string(order));
    long x = 0, y = 0, t = d;
    for (long s = 1; s < n; s *= 2) {
        long rx = 1 & (t / 2);
        long ry = 1 & (t ^ rx);
        if (ry == 0) {
            if (rx == 1) {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::swap(x, y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
    }
    return {static_cast<int>(x), static_cast<int>(y)};
}

// Smallest order whose grid holds `count` cells.
inline int hilbert_order_for(long count) {
    int order = 0;
    while ((1L << (2 * order)) < count) ++order;
    return order;
}

}  // namespace schedlab
