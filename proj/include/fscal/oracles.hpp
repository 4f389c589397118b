#pragma once

// Slow reference implementations used to cross-check the production code
// paths: they favour directness over speed and share no code with them.

#include <vector>

#include "fscal/diff.hpp"
#include "fscal/temporal.hpp"

namespace fscal::oracle {

double tiou(const TemporalSegment& a, const TemporalSegment& b);

/// Repeatedly take the best remaining candidate and drop everything
/// overlapping it by more than `threshold`.
std::vector<ScoredSegment> nms(const std::vector<ScoredSegment>& candidates, double threshold);

/// Re-matches every ranked prefix from scratch, then integrates the
/// interpolated precision max{p(k) : r(k) >= r} over the recall steps.
double episode_ap(std::vector<ScoredSegment> predictions, const std::vector<TemporalSegment>& gts,
                  double theta);

/// W[s, r] with explicit per-element loops.
diff::Matrix pairwise_weights(const diff::Matrix& pn, const diff::Matrix& m_qs, int supports,
                              int parts);

struct Dense {
  diff::Matrix weight;  // in x out
  diff::Matrix bias;    // 1 x out
};

diff::Matrix apply(const Dense& d, const diff::Matrix& x);

/// c1(softmax_rows(c2(I1) c3(I2)^T) c4(I2)) + I1, with an explicit
/// per-row softmax.
diff::Matrix basic_block(const diff::Matrix& i1, const diff::Matrix& i2, const Dense& c1,
                         const Dense& c2, const Dense& c3, const Dense& c4);

diff::Matrix residual_block(const diff::Matrix& x, const Dense& c1, const Dense& c2);

/// P_n scaled by the per-proposal mean of W over supports.
diff::Matrix fuse(const diff::Matrix& pn, const diff::Matrix& w);

}  // namespace fscal::oracle
