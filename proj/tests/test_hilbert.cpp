#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <set>

#include "oracles.hpp"
#include "semocc/hilbert.hpp"
#include "semocc/rng.hpp"

using namespace semocc;

TEST_CASE("codec inverts itself") {
  for (int bits = 0; bits <= 4; ++bits) {
    int n = 1 << bits;
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
          auto idx = hilbert_index(x, y, z, bits);
          auto cell = hilbert_cell(idx, bits);
          CHECK(cell == std::array<int, 3>{x, y, z});
        }
  }
}

TEST_CASE("matches recursive gray-code construction") {
  for (int order = 1; order <= 5; ++order) {
    auto oracle = semocc::testing::hilbert_recursive_oracle(order);
    REQUIRE(static_cast<uint64_t>(oracle.size()) == (1ull << (3 * order)));
    for (uint64_t s = 0; s < oracle.size(); ++s) {
      auto cell = hilbert_cell(s, order);
      REQUIRE(cell == oracle[static_cast<size_t>(s)]);
    }
  }
}

TEST_CASE("single cell grid") {
  auto h = hilbert_order(1, 1, 1);
  CHECK(h.size() == 1);
  CHECK(h.cell_to_seq == std::vector<int64_t>{0});
  CHECK(h.seq_to_cell == std::vector<int64_t>{0});
}

TEST_CASE("2x2x2 path is adjacent") {
  auto h = hilbert_order(2, 2, 2);
  REQUIRE(h.size() == 8);
  for (int64_t s = 1; s < 8; ++s) {
    int64_t a = h.seq_to_cell[static_cast<size_t>(s - 1)];
    int64_t b = h.seq_to_cell[static_cast<size_t>(s)];
    int ax = static_cast<int>(a / 4), ay = static_cast<int>((a / 2) % 2), az = static_cast<int>(a % 2);
    int bx = static_cast<int>(b / 4), by = static_cast<int>((b / 2) % 2), bz = static_cast<int>(b % 2);
    CHECK(std::abs(ax - bx) + std::abs(ay - by) + std::abs(az - bz) == 1);
  }
}

TEST_CASE("non power of two dims are a filtered subsequence of the padded curve") {
  auto h = hilbert_order(3, 2, 2);
  REQUIRE(h.size() == 12);
  // filter the padded 4^3 curve by hand
  std::vector<int64_t> expect;
  for (uint64_t s = 0; s < 64; ++s) {
    auto [x, y, z] = hilbert_cell(s, 2);
    if (x < 3 && y < 2 && z < 2) expect.push_back((static_cast<int64_t>(x) * 2 + y) * 2 + z);
  }
  CHECK(h.seq_to_cell == expect);
}

TEST_CASE("bijectivity exhaustive up to 8 cubed") {
  for (int nx = 1; nx <= 8; ++nx)
    for (int ny = 1; ny <= 8; ++ny)
      for (int nz = 1; nz <= 8; ++nz) {
        auto h = hilbert_order(nx, ny, nz);
        const int64_t n = static_cast<int64_t>(nx) * ny * nz;
        REQUIRE(h.size() == n);
        std::vector<bool> seen(static_cast<size_t>(n), false);
        for (int64_t s = 0; s < n; ++s) {
          int64_t cell = h.seq_to_cell[static_cast<size_t>(s)];
          REQUIRE(cell >= 0);
          REQUIRE(cell < n);
          REQUIRE_FALSE(seen[static_cast<size_t>(cell)]);
          seen[static_cast<size_t>(cell)] = true;
          REQUIRE(h.cell_to_seq[static_cast<size_t>(cell)] == s);
        }
      }
}

TEST_CASE("bijectivity on random dims up to 32") {
  Rng rng(808);
  for (int rep = 0; rep < 12; ++rep) {
    int nx = 1 + static_cast<int>(rng.below(32));
    int ny = 1 + static_cast<int>(rng.below(32));
    int nz = 1 + static_cast<int>(rng.below(32));
    auto h = hilbert_order(nx, ny, nz);
    const int64_t n = static_cast<int64_t>(nx) * ny * nz;
    REQUIRE(h.size() == n);
    std::vector<bool> seen(static_cast<size_t>(n), false);
    for (int64_t s = 0; s < n; ++s) {
      int64_t cell = h.seq_to_cell[static_cast<size_t>(s)];
      REQUIRE_FALSE(seen[static_cast<size_t>(cell)]);
      seen[static_cast<size_t>(cell)] = true;
      REQUIRE(h.cell_to_seq[static_cast<size_t>(cell)] == s);
    }
  }
}

TEST_CASE("adjacency on power of two cubes") {
  for (int side : {2, 4, 8, 16}) {
    auto h = hilbert_order(side, side, side);
    for (int64_t s = 1; s < h.size(); ++s) {
      int64_t a = h.seq_to_cell[static_cast<size_t>(s - 1)];
      int64_t b = h.seq_to_cell[static_cast<size_t>(s)];
      int az = static_cast<int>(a % side), ay = static_cast<int>((a / side) % side),
          ax = static_cast<int>(a / (static_cast<int64_t>(side) * side));
      int bz = static_cast<int>(b % side), by = static_cast<int>((b / side) % side),
          bx = static_cast<int>(b / (static_cast<int64_t>(side) * side));
      REQUIRE(std::abs(ax - bx) + std::abs(ay - by) + std::abs(az - bz) == 1);
    }
  }
}
