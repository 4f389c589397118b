#include "fscal/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace fscal::oracle {

using diff::Matrix;

double tiou(const TemporalSegment& a, const TemporalSegment& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<ScoredSegment> nms(const std::vector<ScoredSegment>& candidates, double threshold) {
  std::vector<bool> alive(candidates.size(), true);
  std::vector<ScoredSegment> out;
  for (;;) {
    int best = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!alive[i]) continue;
      if (best < 0) {
        best = static_cast<int>(i);
        continue;
      }
      const auto& b = candidates[static_cast<std::size_t>(best)];
      const auto& c = candidates[i];
      if (c.score > b.score || (c.score == b.score && c.segment.start < b.segment.start)) {
        best = static_cast<int>(i);
      }
    }
    if (best < 0) break;
    const ScoredSegment keep = candidates[static_cast<std::size_t>(best)];
    out.push_back(keep);
    alive[static_cast<std::size_t>(best)] = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (alive[i] && oracle::tiou(candidates[i].segment, keep.segment) > threshold) alive[i] = false;
    }
  }
  return out;
}

double episode_ap(std::vector<ScoredSegment> predictions, const std::vector<TemporalSegment>& gts,
                  double theta) {
  std::stable_sort(predictions.begin(), predictions.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
    return a.segment.end < b.segment.end;
  });
  const std::size_t n = predictions.size();
  std::vector<double> prec(n), rec(n);
  for (std::size_t k = 1; k <= n; ++k) {
    std::vector<bool> used(gts.size(), false);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < k; ++i) {
      int best = -1;
      double best_iou = theta;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double o = oracle::tiou(predictions[i].segment, gts[g]);
        if (!used[g] && o > best_iou) {
          best_iou = o;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0) {
        used[static_cast<std::size_t>(best)] = true;
        ++tp;
      }
    }
    prec[k - 1] = static_cast<double>(tp) / static_cast<double>(k);
    rec[k - 1] = static_cast<double>(tp) / static_cast<double>(gts.size());
  }
  std::vector<double> levels(rec.begin(), rec.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double ap = 0.0;
  double prev = 0.0;
  for (double r : levels) {
    if (r <= 0.0) continue;
    double best = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (rec[k] >= r) best = std::max(best, prec[k]);
    }
    ap += (r - prev) * best;
    prev = r;
  }
  return ap;
}

Matrix pairwise_weights(const Matrix& pn, const Matrix& m_qs, int supports, int parts) {
  const auto R = pn.rows();
  const auto C = pn.cols();
  Matrix w(supports, R);
  for (int s = 0; s < supports; ++s) {
    std::vector<double> p(static_cast<std::size_t>(C), 0.0);
    for (int t = 0; t < parts; ++t) {
      for (Eigen::Index c = 0; c < C; ++c) p[static_cast<std::size_t>(c)] += m_qs(s * parts + t, c) / parts;
    }
    for (Eigen::Index r = 0; r < R; ++r) {
      double dot = 0.0, na = 0.0, nb = 0.0, dist = 0.0;
      for (Eigen::Index c = 0; c < C; ++c) {
        const double a = pn(r, c);
        const double b = p[static_cast<std::size_t>(c)];
        dot += a * b;
        na += a * a;
        nb += b * b;
        dist += (a - b) * (a - b);
      }
      const double cosine = (na > 0.0 && nb > 0.0) ? dot / (std::sqrt(na) * std::sqrt(nb)) : 0.0;
      w(s, r) = cosine / (1.0 + std::exp(std::sqrt(dist)));
    }
  }
  return w;
}

Matrix apply(const Dense& d, const Matrix& x) {
  Matrix out(x.rows(), d.weight.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.weight.cols(); ++j) {
      double acc = d.bias(0, j);
      for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * d.weight(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix basic_block(const Matrix& i1, const Matrix& i2, const Dense& c1, const Dense& c2,
                   const Dense& c3, const Dense& c4) {
  const Matrix q = apply(c2, i1);
  const Matrix k = apply(c3, i2);
  const Matrix v = apply(c4, i2);
  Matrix mixed = Matrix::Zero(i1.rows(), v.cols());
  for (Eigen::Index r = 0; r < i1.rows(); ++r) {
    std::vector<double> logits(static_cast<std::size_t>(i2.rows()));
    double top = -INFINITY;
    for (Eigen::Index j = 0; j < i2.rows(); ++j) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < q.cols(); ++c) acc += q(r, c) * k(j, c);
      logits[static_cast<std::size_t>(j)] = acc;
      top = std::max(top, acc);
    }
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - top));
    for (Eigen::Index j = 0; j < i2.rows(); ++j) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) mixed(r, c) += logits[static_cast<std::size_t>(j)] / z * v(j, c);
    }
  }
  return apply(c1, mixed) + i1;
}

Matrix residual_block(const Matrix& x, const Dense& c1, const Dense& c2) {
  Matrix h = apply(c2, x);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = std::max(0.0, h.data()[i]);
  return apply(c1, h) + x;
}

Matrix fuse(const Matrix& pn, const Matrix& w) {
  Matrix out = pn;
  for (Eigen::Index r = 0; r < pn.rows(); ++r) {
    double m = 0.0;
    for (Eigen::Index s = 0; s < w.rows(); ++s) m += w(s, r);
    m /= static_cast<double>(w.rows());
    for (Eigen::Index c = 0; c < pn.cols(); ++c) out(r, c) = pn(r, c) * m;
  }
  return out;
}

}  // namespace fscal::oracle
