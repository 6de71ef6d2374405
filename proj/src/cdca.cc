#include "aerocoop/cdca.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace aerocoop {
namespace {

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* what) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << what << ": shape " << a.shape_string() << " vs " << b.shape_string();
    throw std::invalid_argument(msg.str());
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Tensor3 pad_edges(const Tensor3& f, int n0, int n1) {
  Tensor3 out(n0, n1, f.dim2());
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const auto src = f.row(std::min(i, f.dim0() - 1), std::min(j, f.dim1() - 1));
      std::copy(src.begin(), src.end(), out.row(i, j).begin());
    }
  }
  return out;
}

// Root mean square cell norm over the non-empty cells.
double occupied_rms(const Tensor3& f) {
  double sum = 0.0;
  long count = 0;
  for (int i = 0; i < f.dim0(); ++i) {
    for (int j = 0; j < f.dim1(); ++j) {
      const double n2 = dot(f.row(i, j), f.row(i, j));
      if (n2 > 0.0) {
        sum += n2;
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : std::sqrt(sum / count);
}

// Brings the weaker map up to the scale of the stronger one.
void align_scales(Tensor3& a, Tensor3& b) {
  const double sa = occupied_rms(a);
  const double sb = occupied_rms(b);
  if (sa == 0.0 || sb == 0.0 || sa == sb) return;
  const double common = std::max(sa, sb);
  for (double& x : a.data()) x *= common / sa;
  for (double& x : b.data()) x *= common / sb;
}

Tensor3 crop(const Tensor3& f, int n0, int n1) {
  Tensor3 out(n0, n1, f.dim2());
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const auto src = f.row(i, j);
      std::copy(src.begin(), src.end(), out.row(i, j).begin());
    }
  }
  return out;
}

Eigen::MatrixXd tokens_of(const Tensor3& pooled) {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(pooled.dim0()) * pooled.dim1(),
                    pooled.dim2());
  for (int i = 0; i < pooled.dim0(); ++i) {
    for (int j = 0; j < pooled.dim1(); ++j) {
      const auto src = pooled.row(i, j);
      for (int k = 0; k < pooled.dim2(); ++k) {
        t(static_cast<Eigen::Index>(i) * pooled.dim1() + j, k) = src[k];
      }
    }
  }
  return t;
}

// Nearest-neighbour replication of a token matrix back to a full map.
Tensor3 tokens_to_map(const Eigen::MatrixXd& t, int p0, int p1, int pool) {
  Tensor3 out(p0 * pool, p1 * pool, static_cast<int>(t.cols()));
  for (int i = 0; i < out.dim0(); ++i) {
    for (int j = 0; j < out.dim1(); ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i / pool) * p1 + j / pool;
      auto dst = out.row(i, j);
      for (int k = 0; k < out.dim2(); ++k) dst[k] = t(row, k);
    }
  }
  return out;
}

}  // namespace

void AttentionConfig::validate() const {
  if (d_k < 1) throw std::invalid_argument("fusion.d_k must be >= 1");
  if (token_pool < 1) throw std::invalid_argument("fusion.token_pool must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("fusion.lambda must lie in [0,1]");
  }
}

Tensor3 average_pool(const Tensor3& f, int factor) {
  if (factor < 1 || f.dim0() % factor != 0 || f.dim1() % factor != 0) {
    std::ostringstream msg;
    msg << "average_pool: " << f.shape_string() << " not divisible by " << factor;
    throw std::invalid_argument(msg.str());
  }
  const int n0 = f.dim0() / factor;
  const int n1 = f.dim1() / factor;
  Tensor3 out(n0, n1, f.dim2());
  const double inv = 1.0 / (factor * factor);
  for (int i = 0; i < f.dim0(); ++i) {
    for (int j = 0; j < f.dim1(); ++j) {
      const auto src = f.row(i, j);
      auto dst = out.row(i / factor, j / factor);
      for (int k = 0; k < f.dim2(); ++k) dst[k] += src[k] * inv;
    }
  }
  return out;
}

Tensor3 upsample_bilinear(const Tensor3& f, int factor) {
  if (factor == 1) return f;
  const int n0 = f.dim0() * factor;
  const int n1 = f.dim1() * factor;
  Tensor3 out(n0, n1, f.dim2());
  auto axis = [factor](int i, int n, int& lo, int& hi, double& t) {
    const double s = std::clamp((i + 0.5) / factor - 0.5, 0.0, n - 1.0);
    lo = static_cast<int>(std::floor(s));
    hi = std::min(lo + 1, n - 1);
    t = s - lo;
  };
  for (int i = 0; i < n0; ++i) {
    int i0, i1;
    double ti;
    axis(i, f.dim0(), i0, i1, ti);
    for (int j = 0; j < n1; ++j) {
      int j0, j1;
      double tj;
      axis(j, f.dim1(), j0, j1, tj);
      const auto a = f.row(i0, j0);
      const auto b = f.row(i0, j1);
      const auto c = f.row(i1, j0);
      const auto d = f.row(i1, j1);
      auto dst = out.row(i, j);
      for (int k = 0; k < f.dim2(); ++k) {
        dst[k] = (1 - ti) * ((1 - tj) * a[k] + tj * b[k]) +
                 ti * ((1 - tj) * c[k] + tj * d[k]);
      }
    }
  }
  return out;
}

Pyramid build_pyramid(const Tensor3& f) {
  if (f.dim0() % kPyramidAlign != 0 || f.dim1() % kPyramidAlign != 0) {
    std::ostringstream msg;
    msg << "build_pyramid: spatial dims " << f.dim0() << "x" << f.dim1()
        << " must be multiples of " << kPyramidAlign << "; pad by "
        << (kPyramidAlign - f.dim0() % kPyramidAlign) % kPyramidAlign << "x"
        << (kPyramidAlign - f.dim1() % kPyramidAlign) % kPyramidAlign;
    throw std::invalid_argument(msg.str());
  }
  Pyramid p;
  p.levels[0] = f;
  p.rescaled[0] = f;
  for (int m = 1; m < kPyramidLevels; ++m) {
    p.levels[m] = average_pool(p.levels[m - 1], 2);
    p.rescaled[m] = upsample_bilinear(p.levels[m], 1 << m);
  }
  return p;
}

Tensor3 cascade(const Tensor3& f_veh, const Tensor3& f_uav) {
  require_same_shape(f_veh, f_uav, "cascade");
  const int c = f_veh.dim2();
  Tensor3 out(f_veh.dim0(), f_veh.dim1(), 2 * c);
  for (int i = 0; i < f_veh.dim0(); ++i) {
    for (int j = 0; j < f_veh.dim1(); ++j) {
      auto dst = out.row(i, j);
      const auto a = f_veh.row(i, j);
      const auto b = f_uav.row(i, j);
      std::copy(a.begin(), a.end(), dst.begin());
      std::copy(b.begin(), b.end(), dst.begin() + c);
    }
  }
  return out;
}

FusionWeights correlation_weights(const Tensor3& f_i,
                                  std::span<const Tensor3> cascades,
                                  CorrelationMode mode) {
  if (cascades.size() != kPyramidLevels) {
    throw std::invalid_argument("correlation_weights: need 4 cascades");
  }
  FusionWeights w;
  const double norm_i = std::sqrt(dot(f_i.data(), f_i.data()));
  bool degenerate = norm_i == 0.0;
  for (int m = 0; m < kPyramidLevels && !degenerate; ++m) {
    const Tensor3& fm = cascades[m];
    if (fm.dim0() != f_i.dim0() || fm.dim1() != f_i.dim1() ||
        fm.dim2() != 2 * f_i.dim2()) {
      throw std::invalid_argument("correlation_weights: cascade " +
                                  fm.shape_string() + " vs map " +
                                  f_i.shape_string());
    }
    // Dot products against the reduced (or ground) half without
    // materialising it.
    const int c = f_i.dim2();
    const auto fi = f_i.data();
    const auto cm = fm.data();
    double num = 0.0;
    double norm2 = 0.0;
    for (size_t p = 0, n = fi.size() / c; p < n; ++p) {
      const double* src = cm.data() + 2 * c * p;
      const double* own = fi.data() + c * p;
      for (int k = 0; k < c; ++k) {
        const double r = mode == CorrelationMode::kCosine
                             ? 0.5 * (src[k] + src[k + c])
                             : src[k];
        num += own[k] * r;
        norm2 += r * r;
      }
    }
    if (mode == CorrelationMode::kCosine) {
      if (norm2 == 0.0) {
        degenerate = true;
        break;
      }
      w.beta[m] = num / (norm_i * std::sqrt(norm2));
    } else {
      w.beta[m] = num / (norm_i * norm_i);
    }
  }
  if (degenerate) {
    w.beta.fill(0.0);
    w.omega.fill(1.0 / kPyramidLevels);
    return w;
  }
  double total = 0.0;
  for (int m = 0; m < kPyramidLevels; ++m) {
    // Cosine lies in [-1, 1]; the literal ratio is unbounded below.
    const double shifted = std::max(0.0, w.beta[m] + 1.0);
    w.omega[m] = shifted;
    total += shifted;
  }
  if (total <= 0.0) {
    w.omega.fill(1.0 / kPyramidLevels);
  } else {
    for (double& o : w.omega) o /= total;
  }
  return w;
}

Tensor3 enhance(std::span<const Tensor3> rescaled, const FusionWeights& w) {
  if (rescaled.size() != kPyramidLevels) {
    throw std::invalid_argument("enhance: need 4 rescaled maps");
  }
  Tensor3 out(rescaled[0].dim0(), rescaled[0].dim1(), rescaled[0].dim2());
  auto dst = out.data();
  for (int m = 0; m < kPyramidLevels; ++m) {
    require_same_shape(rescaled[0], rescaled[m], "enhance");
    if (w.omega[m] == 0.0) continue;
    const auto src = rescaled[m].data();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += w.omega[m] * src[i];
  }
  return out;
}

Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& queries,
                                  const Eigen::MatrixXd& keys, int d_k) {
  if (queries.cols() != keys.cols()) {
    throw std::invalid_argument("attention_weights: token widths differ");
  }
  if (d_k < 1) throw std::invalid_argument("attention_weights: d_k < 1");
  Eigen::MatrixXd s = queries * keys.transpose() / std::sqrt(double(d_k));
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
  return s;
}

AttentionOutput cross_domain_attention(const Tensor3& f_veh,
                                       const Tensor3& f_uav,
                                       const AttentionConfig& cfg) {
  return cross_domain_attention(f_veh, f_uav, f_veh, f_uav, cfg);
}

AttentionOutput cross_domain_attention(const Tensor3& f_veh,
                                       const Tensor3& f_uav,
                                       const Tensor3& value_veh,
                                       const Tensor3& value_uav,
                                       const AttentionConfig& cfg) {
  cfg.validate();
  require_same_shape(f_veh, f_uav, "cross_domain_attention");
  require_same_shape(value_veh, value_uav, "cross_domain_attention values");
  if (value_veh.dim0() != f_veh.dim0() || value_veh.dim1() != f_veh.dim1()) {
    throw std::invalid_argument("cross_domain_attention: value grid differs");
  }
  const int pool = cfg.token_pool;
  if (f_veh.dim0() % pool != 0 || f_veh.dim1() % pool != 0) {
    std::ostringstream msg;
    msg << "cross_domain_attention: token_pool " << pool << " does not divide "
        << f_veh.dim0() << "x" << f_veh.dim1();
    throw std::invalid_argument(msg.str());
  }
  const Tensor3 pv = average_pool(f_veh, pool);
  const Tensor3 pu = average_pool(f_uav, pool);
  const int p0 = pv.dim0();
  const int p1 = pv.dim1();

  if (cfg.scope == AttentionScope::kGlobal) {
    const Eigen::MatrixXd tv = tokens_of(pv);
    const Eigen::MatrixXd tu = tokens_of(pu);
    Eigen::MatrixXd keys(tv.rows() + tu.rows(), tv.cols());
    keys << tv, tu;
    const Eigen::MatrixXd vv = tokens_of(average_pool(value_veh, pool));
    const Eigen::MatrixXd vu = tokens_of(average_pool(value_uav, pool));
    Eigen::MatrixXd values(vv.rows() + vu.rows(), vv.cols());
    values << vv, vu;
    if (cfg.mask_empty) {
      std::vector<Eigen::Index> kept;
      for (Eigen::Index r = 0; r < keys.rows(); ++r) {
        if (keys.row(r).squaredNorm() > 0.0) kept.push_back(r);
      }
      if (!kept.empty() && kept.size() < static_cast<size_t>(keys.rows())) {
        keys = Eigen::MatrixXd(keys(kept, Eigen::all));
        values = Eigen::MatrixXd(values(kept, Eigen::all));
      }
    }
    return {tokens_to_map(attention_weights(tv, keys, cfg.d_k) * values, p0, p1, pool),
            tokens_to_map(attention_weights(tu, keys, cfg.d_k) * values, p0, p1, pool)};
  }

  AttentionOutput out{Tensor3(value_veh.dim0(), value_veh.dim1(), value_veh.dim2()),
                      Tensor3(value_veh.dim0(), value_veh.dim1(), value_veh.dim2())};
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_k));
  for (int a = 0; a < p0; ++a) {
    for (int b = 0; b < p1; ++b) {
      const auto tv = pv.row(a, b);
      const auto tu = pu.row(a, b);
      const double vv = dot(tv, tv) * scale;
      const double vu = dot(tv, tu) * scale;
      const double uu = dot(tu, tu) * scale;
      // Two-key softmax rows for the ground and aerial queries.
      double wv_self = 1.0 / (1.0 + std::exp(vu - vv));
      double wu_self = 1.0 / (1.0 + std::exp(vu - uu));
      if (cfg.mask_empty && (vv == 0.0) != (uu == 0.0)) {
        // Only one domain observed this block: both rows read its key.
        wv_self = vv == 0.0 ? 0.0 : 1.0;
        wu_self = 1.0 - wv_self;
      }
      for (int i = a * pool; i < (a + 1) * pool; ++i) {
        for (int j = b * pool; j < (b + 1) * pool; ++j) {
          const auto xv = value_veh.row(i, j);
          const auto xu = value_uav.row(i, j);
          auto ov = out.veh.row(i, j);
          auto ou = out.uav.row(i, j);
          for (int k = 0; k < value_veh.dim2(); ++k) {
            ov[k] = wv_self * xv[k] + (1.0 - wv_self) * xu[k];
            ou[k] = (1.0 - wu_self) * xv[k] + wu_self * xu[k];
          }
        }
      }
    }
  }
  return out;
}

Tensor3 blend(const Tensor3& a, const Tensor3& b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("blend: lambda must lie in [0,1]");
  }
  require_same_shape(a, b, "blend");
  if (lambda == 1.0) return a;
  if (lambda == 0.0) return b;
  Tensor3 out(a.dim0(), a.dim1(), a.dim2());
  const auto x = a.data();
  const auto y = b.data();
  auto dst = out.data();
  for (size_t i = 0; i < dst.size(); ++i) {
    dst[i] = lambda * x[i] + (1.0 - lambda) * y[i];
  }
  return out;
}

BevFeature fuse(const BevFeature& bev_veh, const BevFeature& bev_uav,
                const AttentionConfig& cfg) {
  cfg.validate();
  if (!(bev_veh.grid == bev_uav.grid)) {
    throw std::invalid_argument("fuse: maps live on different grids");
  }
  require_same_shape(bev_veh.data, bev_uav.data, "fuse");
  const int n0 = bev_veh.data.dim0();
  const int n1 = bev_veh.data.dim1();
  const int align = std::lcm(kPyramidAlign, cfg.token_pool);
  const int m0 = (n0 + align - 1) / align * align;
  const int m1 = (n1 + align - 1) / align * align;
  Tensor3 fv = m0 == n0 && m1 == n1 ? bev_veh.data : pad_edges(bev_veh.data, m0, m1);
  Tensor3 fu = m0 == n0 && m1 == n1 ? bev_uav.data : pad_edges(bev_uav.data, m0, m1);
  if (cfg.align_scales) align_scales(fv, fu);

  const Pyramid pv = build_pyramid(fv);
  const Pyramid pu = build_pyramid(fu);
  std::array<Tensor3, kPyramidLevels> cascades;
  for (int m = 0; m < kPyramidLevels; ++m) {
    cascades[m] = cascade(pv.rescaled[m], pu.rescaled[m]);
  }
  const FusionWeights wv = correlation_weights(pv.levels[0], cascades, cfg.correlation);
  const FusionWeights wu = correlation_weights(pu.levels[0], cascades, cfg.correlation);
  const Tensor3 sv = enhance(pv.rescaled, wv);
  const Tensor3 su = enhance(pu.rescaled, wu);
  // The enhanced maps steer the attention; the level-0 maps are mixed.
  const AttentionOutput att = cross_domain_attention(sv, su, fv, fu, cfg);
  Tensor3 fused = blend(att.veh, att.uav, cfg.lambda);
  if (m0 != n0 || m1 != n1) fused = crop(fused, n0, n1);
  return {bev_veh.grid, std::move(fused), bev_veh.agent + "+" + bev_uav.agent,
          Domain::kGround};
}

BevFeature mean_fuse(std::span<const BevFeature> maps) {
  if (maps.empty()) throw std::invalid_argument("mean_fuse: no maps");
  BevFeature out = maps[0];
  for (size_t i = 1; i < maps.size(); ++i) {
    require_same_shape(out.data, maps[i].data, "mean_fuse");
    const auto src = maps[i].data.data();
    auto dst = out.data.data();
    for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    out.agent += "+" + maps[i].agent;
  }
  const double inv = 1.0 / maps.size();
  for (double& x : out.data.data()) x *= inv;
  return out;
}

}  // namespace aerocoop
