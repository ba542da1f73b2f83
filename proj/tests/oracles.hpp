#pragma once

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library beyond its data
// types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "tbss/tbss.hpp"

namespace oracle {

using tbss::BinaryMask;
using tbss::Dims;
using tbss::PixelCoord;
using tbss::ProbabilityVolume;
using tbss::SliceMask;

inline ProbabilityVolume random_volume(std::mt19937_64& rng, Dims d) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(d.size());
  for (auto& x : v) {
    const float r = u(rng);
    // mix of confident voxels, zeros and ties
    if (r < 0.15f) x = 0.0f;
    else if (r < 0.25f) x = 1.0f;
    else if (r < 0.3f) x = 0.5f;
    else x = u(rng);
  }
  return ProbabilityVolume(d, std::move(v));
}

inline double logp(float p, double floor) { return std::log(std::max(static_cast<double>(p), floor)); }

/// Every coordinate sequence through all slices whose steps stay in the beam
/// and whose prefix sums stay above T; returns the union of their voxels.
inline BinaryMask enumerate_paths(const ProbabilityVolume& vol, int beam, double T, double floor = 1e-9) {
  const Dims d = vol.dims();
  const int half = beam / 2;
  const int H = static_cast<int>(d.rows), W = static_cast<int>(d.cols), N = static_cast<int>(d.slices);
  std::vector<std::uint8_t> out(d.size(), 0);
  std::vector<std::pair<int, int>> path(static_cast<std::size_t>(N));
  std::function<void(int, double)> walk = [&](int m, double sum) {
    if (m == N) {
      for (int k = 0; k < N; ++k) out[vol.index(k, path[k].first, path[k].second)] = 1;
      return;
    }
    const auto [pr, pc] = path[static_cast<std::size_t>(m - 1)];
    for (int r = pr - half; r <= pr + half; ++r) {
      for (int c = pc - half; c <= pc + half; ++c) {
        if (r < 0 || c < 0 || r >= H || c >= W) continue;
        const double s = sum + logp(vol(m, r, c), floor);
        if (!(s > T)) continue;
        path[static_cast<std::size_t>(m)] = {r, c};
        walk(m + 1, s);
      }
    }
  };
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double s = logp(vol(0, r, c), floor);
      if (!(s > T)) continue;
      path[0] = {r, c};
      walk(1, s);
    }
  }
  return BinaryMask(d, std::move(out));
}

/// Literal depth-first beam stack search: at each expansion the children that
/// keep the prefix above T are sorted by probability (descending, ties by
/// row then column) and only the first S are explored.
inline BinaryMask stack_dfs(const ProbabilityVolume& vol, int beam, std::size_t S, double T, double floor = 1e-9) {
  const Dims d = vol.dims();
  const int half = beam / 2;
  const int H = static_cast<int>(d.rows), W = static_cast<int>(d.cols), N = static_cast<int>(d.slices);
  std::vector<std::uint8_t> out(d.size(), 0);
  std::vector<std::pair<int, int>> path(static_cast<std::size_t>(N));
  std::function<void(int, double)> walk = [&](int m, double sum) {
    if (m == N) {
      for (int k = 0; k < N; ++k) out[vol.index(k, path[k].first, path[k].second)] = 1;
      return;
    }
    const auto [pr, pc] = path[static_cast<std::size_t>(m - 1)];
    struct Cand {
      float p;
      int r, c;
      double s;
    };
    std::vector<Cand> cands;
    for (int r = pr - half; r <= pr + half; ++r) {
      for (int c = pc - half; c <= pc + half; ++c) {
        if (r < 0 || c < 0 || r >= H || c >= W) continue;
        const double s = sum + logp(vol(m, r, c), floor);
        if (s > T) cands.push_back({vol(m, r, c), r, c, s});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return std::tie(b.p, a.r, a.c) < std::tie(a.p, b.r, b.c);
    });
    if (cands.size() > S) cands.resize(S);
    for (const auto& k : cands) {
      path[static_cast<std::size_t>(m)] = {k.r, k.c};
      walk(m + 1, k.s);
    }
  };
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double s = logp(vol(0, r, c), floor);
      if (!(s > T)) continue;
      path[0] = {r, c};
      walk(1, s);
    }
  }
  return BinaryMask(d, std::move(out));
}

/// A few filled or hollow ellipses plus salt-and-pepper speckle.
inline SliceMask random_blobs(std::mt19937_64& rng, int h, int w) {
  SliceMask m(h, w);
  std::uniform_int_distribution<int> nb(1, 6);
  const int blobs = nb(rng);
  for (int b = 0; b < blobs; ++b) {
    std::uniform_int_distribution<int> rr(0, h - 1), cc(0, w - 1), rad(1, std::max(1, std::min(h, w) / 3));
    const int r0 = rr(rng), c0 = cc(rng), rad2 = rad(rng), rad1 = rad(rng);
    const bool hollow = rng() % 3 == 0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const double u = double(r - r0) / rad1, v = double(c - c0) / rad2;
        const double q = u * u + v * v;
        if (q <= 1.0 && !(hollow && q < 0.3)) m.set(r, c, true);
      }
  }
  // speckle
  std::uniform_int_distribution<int> rr(0, h - 1), cc(0, w - 1);
  for (int k = 0; k < (h * w) / 40; ++k) m.set(rr(rng), cc(rng), rng() % 2 == 0);
  return m;
}

// ---- thinning ----------------------------------------------------------------------

/// Two-subiteration thinning written out with the classic P2..P9 names,
/// repeated until nothing changes. When a whole 2x2 block would go in one
/// subiteration its top-left pixel stays.
inline SliceMask thin(const SliceMask& in) {
  const int H = in.rows(), W = in.cols();
  std::vector<std::vector<int>> img(static_cast<std::size_t>(H), std::vector<int>(static_cast<std::size_t>(W)));
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) img[r][c] = in(r, c);
  auto px = [&](int r, int c) { return (r < 0 || c < 0 || r >= H || c >= W) ? 0 : img[r][c]; };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 1; step <= 2; ++step) {
      std::vector<std::vector<int>> del(static_cast<std::size_t>(H), std::vector<int>(static_cast<std::size_t>(W)));
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          if (!img[r][c]) continue;
          const int P2 = px(r - 1, c), P3 = px(r - 1, c + 1), P4 = px(r, c + 1), P5 = px(r + 1, c + 1);
          const int P6 = px(r + 1, c), P7 = px(r + 1, c - 1), P8 = px(r, c - 1), P9 = px(r - 1, c - 1);
          const int B = P2 + P3 + P4 + P5 + P6 + P7 + P8 + P9;
          const int seq[9] = {P2, P3, P4, P5, P6, P7, P8, P9, P2};
          int A = 0;
          for (int k = 0; k < 8; ++k) A += (seq[k] == 0 && seq[k + 1] == 1);
          if (B < 2 || B > 6 || A != 1) continue;
          if (step == 1 && (P2 * P4 * P6 != 0 || P4 * P6 * P8 != 0)) continue;
          if (step == 2 && (P2 * P4 * P8 != 0 || P2 * P6 * P8 != 0)) continue;
          del[r][c] = 1;
        }
      }
      auto d = [&](int r, int c) { return (r < H && c < W) ? del[r][c] : 0; };
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          if (!del[r][c]) continue;
          const bool block = d(r, c + 1) && d(r + 1, c) && d(r + 1, c + 1);
          // a block's top-left pixel survives; decided on the original flags
          if (block) continue;
          img[r][c] = 0;
          changed = true;
        }
      }
    }
  }
  SliceMask out(H, W);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) out.set(r, c, img[r][c] != 0);
  return out;
}

/// Number of 8-connected foreground components.
inline int components8(const SliceMask& m) {
  const int H = m.rows(), W = m.cols();
  std::vector<int> seen(static_cast<std::size_t>(H * W), 0);
  int n = 0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!m(r, c) || seen[r * W + c]) continue;
      ++n;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      seen[r * W + c] = 1;
      while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (m(yy, xx) && !seen[yy * W + xx]) {
              seen[yy * W + xx] = 1;
              q.push({yy, xx});
            }
          }
      }
    }
  }
  return n;
}

// ---- borders -------------------------------------------------------------------------

struct Borders {
  std::multiset<std::set<PixelCoord>> outer;
  std::multiset<std::set<PixelCoord>> holes;
};

/// Border pixel sets by adjacency classification: for each foreground
/// component C (8-connected) and each background component K (4-connected, the
/// image surrounded by background) touching it, the pixels of C 4-adjacent to
/// K. The pair is an outer border when K is the component west of C's first
/// pixel in raster order, otherwise a hole border.
inline Borders classify_borders(const SliceMask& m) {
  const int H = m.rows() + 2, W = m.cols() + 2;
  auto fg = [&](int r, int c) { return m(r - 1, c - 1) != 0; };
  std::vector<int> fgc(static_cast<std::size_t>(H * W), -1), bgc(static_cast<std::size_t>(H * W), -1);
  auto flood = [&](std::vector<int>& lab, int r0, int c0, int id, bool want_fg, bool eight) {
    std::queue<std::pair<int, int>> q;
    q.push({r0, c0});
    lab[r0 * W + c0] = id;
    while (!q.empty()) {
      auto [y, x] = q.front();
      q.pop();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (!eight && dy != 0 && dx != 0) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
          if (fg(yy, xx) != want_fg || lab[yy * W + xx] >= 0) continue;
          lab[yy * W + xx] = id;
          q.push({yy, xx});
        }
    }
  };
  int nf = 0, nb = 0;
  std::vector<std::pair<int, int>> first;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      if (fg(r, c) && fgc[r * W + c] < 0) {
        first.push_back({r, c});
        flood(fgc, r, c, nf++, true, true);
      }
      if (!fg(r, c) && bgc[r * W + c] < 0) flood(bgc, r, c, nb++, false, false);
    }
  std::map<std::pair<int, int>, std::set<PixelCoord>> sets;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      if (!fg(r, c)) continue;
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int yy = r + dr[k], xx = c + dc[k];
        if (!fg(yy, xx)) sets[{fgc[r * W + c], bgc[yy * W + xx]}].insert({r - 1, c - 1});
      }
    }
  Borders b;
  for (auto& [key, pts] : sets) {
    const auto [cr, cc] = first[static_cast<std::size_t>(key.first)];
    const bool outer = bgc[cr * W + cc - 1] == key.second;
    (outer ? b.outer : b.holes).insert(pts);
  }
  return b;
}

// ---- metrics ---------------------------------------------------------------------------

inline double directed_hausdorff(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b) {
  double worst = 0.0;
  for (const auto& p : a) {
    double best = INFINITY;
    for (const auto& q : b) {
      const double dr = p.row - q.row, dc = p.col - q.col;
      best = std::min(best, std::sqrt(dr * dr + dc * dc));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

inline double hausdorff(const std::vector<PixelCoord>& a, const std::vector<PixelCoord>& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

// ---- Otsu ----------------------------------------------------------------------------

/// Between-class variance of every split of the 256-bin histogram, using bin
/// centres as levels: w0 w1 (mu0 - mu1)^2.
inline std::array<double, 256> split_variances(const ProbabilityVolume& vol) {
  std::array<double, 256> counts{};
  for (float p : vol.data()) {
    int k = static_cast<int>(std::floor(static_cast<double>(p) * 256.0));
    if (k > 255) k = 255;
    counts[static_cast<std::size_t>(k)] += 1.0;
  }
  std::array<double, 256> var{};
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (int k = 0; k < 256; ++k) {
    double w0 = 0, m0 = 0, w1 = 0, m1 = 0;
    for (int i = 0; i < 256; ++i) {
      const double level = (i + 0.5) / 256.0;
      if (i <= k) {
        w0 += counts[i];
        m0 += counts[i] * level;
      } else {
        w1 += counts[i];
        m1 += counts[i] * level;
      }
    }
    if (w0 == 0 || w1 == 0) continue;
    const double diff = m0 / w0 - m1 / w1;
    var[static_cast<std::size_t>(k)] = (w0 / total) * (w1 / total) * diff * diff;
  }
  return var;
}

}  // namespace oracle
