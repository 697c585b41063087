#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace semocc {

// Bijective serialization of a 3D grid along a Hilbert curve. The grid is
// embedded in the smallest enclosing power-of-two cube; padding cells are
// skipped so the order covers exactly the real cells, preserving curve order.
struct HilbertOrder {
  std::array<int, 3> dims{};            // (X, Y, Z)
  std::vector<int64_t> cell_to_seq;     // flat cell (x*Y+y)*Z+z -> sequence position
  std::vector<int64_t> seq_to_cell;     // sequence position -> flat cell
  int order_bits = 0;                   // cube side = 1 << order_bits

  int64_t size() const { return static_cast<int64_t>(seq_to_cell.size()); }
};

HilbertOrder hilbert_order(int nx, int ny, int nz);

// Curve index of a cell within a 2^order_bits cube (transpose-method codec).
uint64_t hilbert_index(int x, int y, int z, int order_bits);
// Inverse: cell coordinates of a curve index.
std::array<int, 3> hilbert_cell(uint64_t index, int order_bits);

}  // namespace semocc
