#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace oracle {

namespace {

int height_of(const LevelMap& q) { return static_cast<int>(q.size()); }
int width_of(const LevelMap& q) { return q.empty() ? 0 : static_cast<int>(q[0].size()); }

bool in_box(const LevelMap& q, int x, int y) { return y >= 0 && y < height_of(q) && x >= 0 && x < width_of(q); }
int at(const LevelMap& q, int x, int y) { return in_box(q, x, y) ? q[y][x] : 0; }

double xlog2x(double p) { return p <= 0.0 ? 0.0 : p * std::log2(p); }

struct Box {
  int x0, y0, x1, y1;
};

Box bbox(const MaskRows& m) {
  Box b{1 << 30, 1 << 30, -1, -1};
  for (int y = 0; y < static_cast<int>(m.size()); ++y)
    for (int x = 0; x < static_cast<int>(m[y].size()); ++x)
      if (m[y][x]) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  return b;
}

std::vector<double> values_in(const Image& img, const MaskRows& m) {
  std::vector<double> v;
  for (std::size_t y = 0; y < img.size(); ++y)
    for (std::size_t x = 0; x < img[y].size(); ++x)
      if (m[y][x]) v.push_back(img[y][x]);
  return v;
}

double interp_percentile(const std::vector<double>& sorted, double pct) {
  const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(i);
  return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  for (;;) {
    if (i < 0)
      i = -1 - i;
    else if (i >= n)
      i = 2 * n - 1 - i;
    else
      return i;
  }
}

}  // namespace

std::map<std::pair<int, int>, long> runs(const LevelMap& q, int dx, int dy) {
  std::map<std::pair<int, int>, long> out;
  const int w = width_of(q), h = height_of(q);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (in_box(q, x - dx, y - dy)) continue;  // not a line start
      int cur = 0, len = 0;
      for (int cx = x, cy = y; in_box(q, cx, cy); cx += dx, cy += dy) {
        const int v = q[cy][cx];
        if (v == cur && v != 0) {
          ++len;
          continue;
        }
        if (cur != 0) ++out[{cur, len}];
        cur = v;
        len = v != 0 ? 1 : 0;
      }
      if (cur != 0) ++out[{cur, len}];
    }
  }
  return out;
}

std::array<double, 11> run_stats(const std::map<std::pair<int, int>, long>& r, long pixels) {
  double n = 0;
  std::map<int, double> by_level, by_length;
  std::array<double, 11> s{};
  for (const auto& [key, count] : r) {
    const double i = key.first, j = key.second, c = static_cast<double>(count);
    n += c;
    by_level[key.first] += c;
    by_length[key.second] += c;
    s[0] += c / (j * j);
    s[1] += c * j * j;
    s[5] += c / (i * i);
    s[6] += c * i * i;
    s[7] += c / (i * i * j * j);
    s[8] += c * i * i / (j * j);
    s[9] += c * j * j / (i * i);
    s[10] += c * i * i * j * j;
  }
  for (const auto& kv : by_level) s[2] += kv.second * kv.second;
  for (const auto& kv : by_length) s[3] += kv.second * kv.second;
  for (int k : {0, 1, 2, 3, 5, 6, 7, 8, 9, 10}) s[k] /= n;
  s[4] = n / static_cast<double>(pixels);
  return s;
}

std::map<int, long> differences(const LevelMap& q, int drow, int dcol) {
  std::map<int, long> out;
  for (int y = 0; y < height_of(q); ++y)
    for (int x = 0; x < width_of(q); ++x) {
      const int a = at(q, x, y), b = at(q, x + dcol, y + drow);
      if (a && b) ++out[std::abs(a - b)];
    }
  return out;
}

std::array<double, 4> difference_stats(const std::map<int, long>& d) {
  std::vector<double> samples;
  for (const auto& [diff, count] : d) samples.insert(samples.end(), static_cast<std::size_t>(count), diff);
  if (samples.empty()) return {0, 0, 0, 0};
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double mean = 0;
  for (double s : samples) mean += s;
  mean /= n;
  double var = 0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= n;
  // lower median: first sample where the cumulative share reaches one half
  const double median = samples[(samples.size() + 1) / 2 - 1];
  return {mean, median, std::sqrt(var), var};
}

std::map<std::pair<int, int>, long> cooccurrence(const LevelMap& q, int drow, int dcol) {
  std::map<std::pair<int, int>, long> out;
  for (int y = 0; y < height_of(q); ++y)
    for (int x = 0; x < width_of(q); ++x) {
      const int a = at(q, x, y), b = at(q, x + dcol, y + drow);
      if (!a || !b) continue;
      ++out[{a, b}];
      ++out[{b, a}];
    }
  return out;
}

std::map<std::pair<int, int>, double> averaged_glcm(const LevelMap& q, int d) {
  std::map<std::pair<int, int>, double> avg;
  int used = 0;
  for (auto [dr, dc] : std::vector<std::pair<int, int>>{{0, d}, {-d, d}, {-d, 0}, {-d, -d}}) {
    const auto c = cooccurrence(q, dr, dc);
    long total = 0;
    for (const auto& kv : c) total += kv.second;
    if (!total) continue;
    ++used;
    for (const auto& [k, v] : c) avg[k] += static_cast<double>(v) / static_cast<double>(total);
  }
  for (auto& kv : avg) kv.second /= used;
  return avg;
}

std::array<double, 13> haralick(const std::map<std::pair<int, int>, double>& p, int g) {
  std::vector<double> px(g + 1, 0.0), py(g + 1, 0.0), psum(2 * g + 1, 0.0), pdiff(g, 0.0);
  double energy = 0, contrast = 0, idm = 0, hxy = 0, eij = 0;
  for (const auto& [k, v] : p) {
    const int i = k.first, j = k.second;
    px[i] += v;
    py[j] += v;
    psum[i + j] += v;
    pdiff[std::abs(i - j)] += v;
    energy += v * v;
    contrast += v * (i - j) * (i - j);
    idm += v / (1.0 + (i - j) * (i - j));
    hxy -= xlog2x(v);
    eij += v * i * j;
  }
  double mx = 0, my = 0;
  for (int i = 1; i <= g; ++i) {
    mx += i * px[i];
    my += i * py[i];
  }
  double vx = 0, vy = 0, ssv = 0;
  for (int i = 1; i <= g; ++i) {
    vx += (i - mx) * (i - mx) * px[i];
    vy += (i - my) * (i - my) * py[i];
  }
  for (const auto& [k, v] : p) ssv += (k.first - mx) * (k.first - mx) * v;
  const double corr = vx * vy > 1e-30 ? (eij - mx * my) / std::sqrt(vx * vy) : 1.0;

  double savg = 0, sent = 0;
  for (int k = 2; k <= 2 * g; ++k) {
    savg += k * psum[k];
    sent -= xlog2x(psum[k]);
  }
  double svar = 0;
  for (int k = 2; k <= 2 * g; ++k) svar += (k - savg) * (k - savg) * psum[k];
  double davg = 0, dent = 0;
  for (int k = 0; k < g; ++k) {
    davg += k * pdiff[k];
    dent -= xlog2x(pdiff[k]);
  }
  double dvar = 0;
  for (int k = 0; k < g; ++k) dvar += (k - davg) * (k - davg) * pdiff[k];

  double hx = 0, hy = 0;
  for (int i = 1; i <= g; ++i) {
    hx -= xlog2x(px[i]);
    hy -= xlog2x(py[i]);
  }
  double hxy1 = 0, hxy2 = 0;
  for (int i = 1; i <= g; ++i)
    for (int j = 1; j <= g; ++j) {
      const double m = px[i] * py[j];
      if (m <= 0) continue;
      const auto it = p.find({i, j});
      if (it != p.end()) hxy1 -= it->second * std::log2(m);
      hxy2 -= m * std::log2(m);
    }
  const double hmax = std::max(hx, hy);
  const double imc1 = hmax > 0 ? (hxy - hxy1) / hmax : 0.0;
  const double imc2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - hxy))));
  return {energy, contrast, corr, ssv, idm, savg, svar, sent, hxy, dvar, dent, imc1, imc2};
}

LevelMap quantize(const Image& img, const MaskRows& mask, int levels) {
  const Box b = bbox(mask);
  const auto v = values_in(img, mask);
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  LevelMap q(b.y1 - b.y0 + 1, std::vector<int>(b.x1 - b.x0 + 1, 0));
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) {
      if (!mask[y][x]) continue;
      int level = 1;
      if (hi > lo) level = std::min(levels, 1 + static_cast<int>(std::floor((img[y][x] - lo) / (hi - lo) * levels)));
      q[y - b.y0][x - b.x0] = level;
    }
  return q;
}

std::array<Band, 4> haar(const Image& img, const MaskRows& mask) {
  const Box b = bbox(mask);
  const int w = b.x1 - b.x0 + 1, h = b.y1 - b.y0 + 1;
  const int hw = (w + 1) / 2, hh = (h + 1) / 2;
  std::array<Band, 4> out;
  for (auto& band : out) {
    band.image.assign(hh, std::vector<double>(hw, 0.0));
    band.mask.assign(hh, std::vector<int>(hw, 0));
  }
  auto px = [&](int x, int y) { return img[b.y0 + std::min(y, h - 1)][b.x0 + std::min(x, w - 1)]; };
  auto pm = [&](int x, int y) { return mask[b.y0 + std::min(y, h - 1)][b.x0 + std::min(x, w - 1)] ? 1 : 0; };
  for (int y = 0; y < hh; ++y)
    for (int x = 0; x < hw; ++x) {
      const double tl = px(2 * x, 2 * y), tr = px(2 * x + 1, 2 * y);
      const double bl = px(2 * x, 2 * y + 1), br = px(2 * x + 1, 2 * y + 1);
      // rows first: low = (top + bottom)/sqrt2, high = (top - bottom)/sqrt2
      const double rl0 = (tl + bl), rl1 = (tr + br), rh0 = (tl - bl), rh1 = (tr - br);
      out[0].image[y][x] = (rl0 + rl1) / 2.0;
      out[1].image[y][x] = (rh0 + rh1) / 2.0;
      out[2].image[y][x] = (rl0 - rl1) / 2.0;
      out[3].image[y][x] = (rh0 - rh1) / 2.0;
      const int in = pm(2 * x, 2 * y) + pm(2 * x + 1, 2 * y) + pm(2 * x, 2 * y + 1) + pm(2 * x + 1, 2 * y + 1);
      for (auto& band : out) band.mask[y][x] = in >= 2;
    }
  return out;
}

std::array<double, 21> density(const Image& img, const MaskRows& mask) {
  auto v = values_in(img, mask);
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double mean = 0, energy = 0;
  for (double x : v) {
    mean += x;
    energy += x * x;
  }
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    m2 += std::pow(x - mean, 2) / n;
    m3 += std::pow(x - mean, 3) / n;
    m4 += std::pow(x - mean, 4) / n;
  }
  const double lo = v.front(), hi = v.back();
  std::vector<double> bins(32, 0.0);
  for (double x : v) {
    const int k = hi > lo ? std::min(31, static_cast<int>((x - lo) / (hi - lo) * 32.0)) : 0;
    bins[k] += 1.0 / n;
  }
  double ent = 0, unif = 0;
  for (double p : bins) {
    ent -= xlog2x(p);
    unif += p * p;
  }
  const double med = median_of(v);
  std::vector<double> dev;
  for (double x : v) dev.push_back(std::fabs(x - med));
  const double p10 = interp_percentile(v, 10), p25 = interp_percentile(v, 25);
  const double p75 = interp_percentile(v, 75), p90 = interp_percentile(v, 90);
  const std::size_t cut = static_cast<std::size_t>(0.1 * n);
  double tm = 0;
  for (std::size_t i = cut; i + cut < v.size(); ++i) tm += v[i];
  tm /= static_cast<double>(v.size() - 2 * cut);
  const double sd = std::sqrt(m2);
  return {mean,
          med,
          sd,
          m2,
          m2 > 0 ? m3 / (m2 * sd) : 0.0,
          m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0,
          energy,
          ent,
          lo,
          hi,
          hi - lo,
          p10,
          p25,
          p75,
          p90,
          p75 - p25,
          median_of(dev),
          std::sqrt(energy / n),
          unif,
          mean != 0 ? sd / mean : 0.0,
          tm};
}

Image log_response(const Image& img, double sigma) {
  const int h = static_cast<int>(img.size()), w = static_cast<int>(img[0].size());
  const int r = static_cast<int>(std::ceil(3 * sigma));
  // dense 2D kernel, normalized as a whole
  std::vector<std::vector<double>> k(2 * r + 1, std::vector<double>(2 * r + 1));
  double total = 0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) total += k[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * sigma * sigma));
  Image g(h, std::vector<double>(w, 0.0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) acc += k[i + r][j + r] / total * img[reflect(y + i, h)][reflect(x + j, w)];
      g[y][x] = acc;
    }
  Image out(h, std::vector<double>(w, 0.0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out[y][x] = g[reflect(y - 1, h)][x] + g[reflect(y + 1, h)][x] + g[y][reflect(x - 1, w)] +
                  g[y][reflect(x + 1, w)] - 4 * g[y][x];
  return out;
}

std::array<double, 3> log_stats(const Image& img, const MaskRows& mask, double sigma) {
  const auto v = values_in(log_response(img, sigma), mask);
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, median_of(v), std::sqrt(var / static_cast<double>(v.size()))};
}

std::vector<double> slice_features(const Image& img, const MaskRows& mask) {
  std::vector<double> out;
  auto put = [&out](const auto& a) { out.insert(out.end(), a.begin(), a.end()); };
  auto pixels = [](const LevelMap& q) {
    long n = 0;
    for (const auto& row : q)
      for (int v : row) n += v > 0;
    return n;
  };
  auto gldm16 = [&](const LevelMap& q) {
    for (auto [dr, dc] : std::vector<std::pair<int, int>>{{0, 1}, {1, 0}, {1, 1}, {1, -1}})
      put(difference_stats(differences(q, dr, dc)));
  };
  const LevelMap q = quantize(img, mask);
  for (auto [dx, dy] : std::vector<std::pair<int, int>>{{1, 0}, {1, -1}, {0, 1}, {1, 1}})
    put(run_stats(runs(q, dx, dy), pixels(q)));
  gldm16(q);

  const Box b = bbox(mask);
  if (b.x1 - b.x0 < 1 || b.y1 - b.y0 < 1) {
    out.insert(out.end(), 252, 0.0);
  } else {
    for (const Band& band : haar(img, mask)) {
      bool any = false;
      for (const auto& row : band.mask)
        for (int v : row) any = any || v;
      if (!any) {
        out.insert(out.end(), 63, 0.0);
        continue;
      }
      const LevelMap qb = quantize(band.image, band.mask);
      for (int d : {1, 2}) {
        const auto p = averaged_glcm(qb, d);
        if (p.empty())
          out.insert(out.end(), 13, 0.0);
        else
          put(haralick(p, 32));
      }
      put(density(band.image, band.mask));
      gldm16(qb);
    }
  }
  put(log_stats(img, mask, 2.0));
  return out;
}

Eigen jacobi(std::vector<std::vector<double>> a) {
  const int n = static_cast<int>(a.size());
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a[x][x] > a[y][y]; });
  Eigen e;
  for (int i : order) {
    e.values.push_back(a[i][i]);
    std::vector<double> col(n);
    for (int k = 0; k < n; ++k) col[k] = v[k][i];
    e.vectors.push_back(col);
  }
  return e;
}

double mann_whitney(const std::vector<double>& s, const std::vector<int>& y) {
  double u = 0;
  long np = 0, nn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i]) ++np; else ++nn;
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      u += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return u / (static_cast<double>(np) * static_cast<double>(nn));
}

std::vector<std::pair<double, double>> sweep_roc(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  std::vector<double> ts{std::numeric_limits<double>::infinity()};
  ts.insert(ts.end(), thresholds.begin(), thresholds.end());
  double np = 0, nn = 0;
  for (int l : y) (l ? np : nn) += 1;
  std::vector<std::pair<double, double>> out;
  for (double t : ts) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (y[i] ? tp : fp) += 1;
    out.push_back({fp / nn, tp / np});
  }
  return out;
}

MaskRows flood(const Image& img, int sx, int sy, double t) {
  const int h = static_cast<int>(img.size()), w = static_cast<int>(img[0].size());
  MaskRows m(h, std::vector<int>(w, 0));
  std::queue<std::pair<int, int>> todo;
  if (img[sy][sx] > t) return m;
  m[sy][sx] = 1;
  todo.push({sx, sy});
  while (!todo.empty()) {
    auto [x, y] = todo.front();
    todo.pop();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || m[ny][nx] || img[ny][nx] > t) continue;
        m[ny][nx] = 1;
        todo.push({nx, ny});
      }
  }
  return m;
}

double ring_contrast(const Image& img, const MaskRows& mask) {
  const int h = static_cast<int>(img.size()), w = static_cast<int>(img[0].size());
  double in = 0, out = 0;
  int nin = 0, nout = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask[y][x]) {
        in += img[y][x];
        ++nin;
        continue;
      }
      bool touch = false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && ny >= 0 && nx < w && ny < h && mask[ny][nx]) touch = true;
        }
      if (touch) {
        out += img[y][x];
        ++nout;
      }
    }
  return nout ? out / nout - in / nin : 0.0;
}

double max_principal_angle(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  const auto k = static_cast<::Eigen::Index>(a[0].size());
  ::Eigen::MatrixXd A(k, static_cast<::Eigen::Index>(a.size())), B(k, static_cast<::Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (::Eigen::Index r = 0; r < k; ++r) A(r, static_cast<::Eigen::Index>(i)) = a[i][r];
  for (std::size_t i = 0; i < b.size(); ++i)
    for (::Eigen::Index r = 0; r < k; ++r) B(r, static_cast<::Eigen::Index>(i)) = b[i][r];
  // sin of the largest angle is the norm of the part of B outside span(A)
  const ::Eigen::MatrixXd resid = B - A * (A.transpose() * B);
  ::Eigen::JacobiSVD<::Eigen::MatrixXd> svd(resid);
  const double s = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return std::asin(std::min(1.0, s));
}

}  // namespace oracle
