#include "semocc/hilbert.hpp"

#include <stdexcept>

namespace semocc {

// Transpose-method Hilbert codec (Skilling). Coordinates are carried as a
// "transposed" bit matrix; Gray coding plus exchange/invert passes map
// between axes and curve position.

uint64_t hilbert_index(int x, int y, int z, int order_bits) {
  int X[3] = {x, y, z};
  const int b = order_bits;
  if (b == 0) return 0;
  for (int q = 1 << (b - 1); q > 1; q >>= 1) {
    int p = q - 1;
    if (X[0] & q) X[0] ^= p;
    for (int i = 1; i < 3; ++i) {
      if (X[i] & q) {
        X[0] ^= p;
      } else {
        int t = (X[0] ^ X[i]) & p;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
  for (int i = 1; i < 3; ++i) X[i] ^= X[i - 1];
  int t = X[2];
  for (int i = 1; i < b; i <<= 1) X[2] ^= X[2] >> i;
  t ^= X[2];
  X[1] ^= t;
  X[0] ^= t;
  uint64_t line = 0;
  for (int bit = b - 1; bit >= 0; --bit)
    for (int i = 0; i < 3; ++i) line = (line << 1) | ((static_cast<uint64_t>(X[i]) >> bit) & 1);
  return line;
}

std::array<int, 3> hilbert_cell(uint64_t index, int order_bits) {
  const int b = order_bits;
  if (b == 0) return {0, 0, 0};
  int X[3] = {0, 0, 0};
  // de-interleave the curve index back into the transposed form
  int pos = 3 * b - 1;
  for (int bit = b - 1; bit >= 0; --bit)
    for (int i = 0; i < 3; ++i) {
      X[i] |= static_cast<int>((index >> pos) & 1) << bit;
      --pos;
    }
  // Gray decode
  int t = X[2] >> 1;
  for (int i = 2; i > 0; --i) X[i] ^= X[i - 1];
  X[0] ^= t;
  // undo excess work
  for (int q = 2; q != (2 << (b - 1)); q <<= 1) {
    int p = q - 1;
    for (int i = 2; i > 0; --i) {
      if (X[i] & q) {
        X[0] ^= p;
      } else {
        int tt = (X[0] ^ X[i]) & p;
        X[0] ^= tt;
        X[i] ^= tt;
      }
    }
    if (X[0] & q) X[0] ^= p;
  }
  return {X[0], X[1], X[2]};
}

HilbertOrder hilbert_order(int nx, int ny, int nz) {
  if (nx <= 0 || ny <= 0 || nz <= 0)
    throw std::invalid_argument("hilbert_order: dims must be positive");
  int side = 1, bits = 0;
  while (side < nx || side < ny || side < nz) {
    side <<= 1;
    ++bits;
  }
  HilbertOrder h;
  h.dims = {nx, ny, nz};
  h.order_bits = bits;
  const int64_t ncells = static_cast<int64_t>(nx) * ny * nz;
  h.cell_to_seq.assign(static_cast<size_t>(ncells), -1);
  h.seq_to_cell.reserve(static_cast<size_t>(ncells));
  const uint64_t cube = static_cast<uint64_t>(side) * side * side;
  for (uint64_t s = 0; s < cube; ++s) {
    auto [x, y, z] = hilbert_cell(s, bits);
    if (x >= nx || y >= ny || z >= nz) continue;  // padding cell, skipped
    int64_t flat = (static_cast<int64_t>(x) * ny + y) * nz + z;
    h.cell_to_seq[static_cast<size_t>(flat)] = static_cast<int64_t>(h.seq_to_cell.size());
    h.seq_to_cell.push_back(flat);
  }
  return h;
}

}  // namespace semocc
