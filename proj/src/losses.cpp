#include "strav/losses.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace strav {

void SequenceSample::validate() const {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("empty sequence sample");
  if (m.size() != n || y.size() != n || gt.size() != n)
    throw std::invalid_argument("sequence sample lists disagree in length");
  for (std::size_t t = 0; t < n; ++t) {
    if (!x[t].same_shape(y[t]) || !x[t].same_shape(gt[t]) ||
        !m[t].same_shape(x[t]))
      throw DimensionMismatch("sequence sample frame dims disagree");
  }
}

FeatureExtractor default_feature_extractor(int levels) {
  return [levels](const Frame& f) {
    // Clamp the pyramid depth to what the dimensions divide evenly into, so
    // the extractor is total over any frame size.
    int usable = 1;
    while (usable < levels && f.height() % (1 << usable) == 0 &&
           f.width() % (1 << usable) == 0)
      ++usable;
    const FeaturePyramid p =
        encode(f, Mask(f.height(), f.width(), 0.0f), usable);
    return p.levels;
  };
}

Critic default_critic() {
  return [](const Frame& f) {
    double acc = 0.0;
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x)
        acc += luma(f.at(y, x, 0), f.at(y, x, 1), f.at(y, x, 2));
    return acc / (static_cast<double>(f.height()) * f.width());
  };
}

Frame y_comb(const Frame& y, const Frame& x, const Mask& m) {
  if (!y.same_shape(x) || !m.same_shape(y))
    throw DimensionMismatch("y_comb inputs disagree");
  Frame out(y.height(), y.width());
  for (int r = 0; r < y.height(); ++r)
    for (int c = 0; c < y.width(); ++c) {
      const float w = m.at(r, c);
      for (int k = 0; k < 3; ++k)
        out.at(r, c, k) = w * y.at(r, c, k) + (1.0f - w) * x.at(r, c, k);
    }
  return out;
}

std::vector<double> gram(const FeatureMap& f) {
  const int C = f.channels;
  std::vector<double> g(static_cast<std::size_t>(C) * C, 0.0);
  const double norm = static_cast<double>(C) * f.h * f.w;
  for (int a = 0; a < C; ++a) {
    const float* pa = f.plane(a);
    for (int b = a; b < C; ++b) {
      const float* pb = f.plane(b);
      double acc = 0.0;
      const std::size_t n = static_cast<std::size_t>(f.h) * f.w;
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(pa[i]) * pb[i];
      g[static_cast<std::size_t>(a) * C + b] = acc / norm;
      g[static_cast<std::size_t>(b) * C + a] = acc / norm;
    }
  }
  return g;
}

namespace {

// Weighted mean absolute difference per channel sample: sum of w*|p-q| over
// all channels divided by (3 * sum of w). Zero when the region is empty.
double weighted_l1(const Frame& p, const Frame& q, const Mask& w) {
  if (!p.same_shape(q) || !w.same_shape(p))
    throw DimensionMismatch("loss operands disagree");
  double sum = 0.0, weight = 0.0;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) {
      const float wv = w.at(y, x);
      if (wv <= 0.0f) continue;
      weight += wv;
      for (int c = 0; c < 3; ++c)
        sum += wv * std::abs(static_cast<double>(p.at(y, x, c)) - q.at(y, x, c));
    }
  return weight > 0.0 ? sum / (3.0 * weight) : 0.0;
}

}  // namespace

double l_align(const SequenceSample& s,
               const std::vector<std::vector<AlignedReference>>& refs) {
  s.validate();
  if (refs.size() != s.x.size())
    throw std::invalid_argument("one reference list per frame required");
  double acc = 0.0;
  bool any_region = false;
  for (std::size_t t = 0; t < s.x.size(); ++t) {
    for (const AlignedReference& r : refs[t]) {
      Mask region(s.x[t].height(), s.x[t].width(), 0.0f);
      bool nonempty = false;
      for (int y = 0; y < region.height(); ++y)
        for (int x = 0; x < region.width(); ++x)
          if (s.m[t].at(y, x) <= 0.0f && r.mask.at(y, x) <= 0.0f) {
            region.at(y, x) = 1.0f;
            nonempty = true;
          }
      if (!nonempty) continue;
      any_region = true;
      acc += weighted_l1(r.frame, s.x[t], region);
    }
  }
  if (!any_region) {
    std::cerr << "warning: alignment loss has no visible overlap; reporting 0\n";
    return 0.0;
  }
  return acc / static_cast<double>(s.frames());
}

double l_hole_visible(const SequenceSample& s,
                      const std::vector<Mask>& c_visible) {
  s.validate();
  if (c_visible.size() != s.x.size())
    throw std::invalid_argument("one coverage map per frame required");
  double acc = 0.0;
  for (std::size_t t = 0; t < s.x.size(); ++t) {
    Mask region(s.m[t].height(), s.m[t].width(), 0.0f);
    for (int y = 0; y < region.height(); ++y)
      for (int x = 0; x < region.width(); ++x)
        region.at(y, x) = s.m[t].at(y, x) * c_visible[t].at(y, x);
    acc += weighted_l1(s.y[t], s.gt[t], region);
  }
  return acc / static_cast<double>(s.frames());
}

double l_hole_leftover(const SequenceSample& s,
                       const std::vector<Mask>& leftover) {
  s.validate();
  if (leftover.size() != s.x.size())
    throw std::invalid_argument("one leftover map per frame required");
  double acc = 0.0;
  for (std::size_t t = 0; t < s.x.size(); ++t)
    acc += weighted_l1(s.y[t], s.gt[t], leftover[t]);
  return acc / static_cast<double>(s.frames());
}

double l_non_hole(const SequenceSample& s) {
  s.validate();
  double acc = 0.0;
  for (std::size_t t = 0; t < s.x.size(); ++t)
    acc += weighted_l1(s.y[t], s.gt[t], invert(s.m[t]));
  return acc / static_cast<double>(s.frames());
}

namespace {

double feature_l1(const std::vector<FeatureMap>& a,
                  const std::vector<FeatureMap>& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("feature stacks disagree in depth");
  double acc = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    if (a[p].channels != b[p].channels || a[p].h != b[p].h || a[p].w != b[p].w)
      throw DimensionMismatch("feature maps disagree in shape");
    double lvl = 0.0;
    for (std::size_t i = 0; i < a[p].data.size(); ++i)
      lvl += std::abs(static_cast<double>(a[p].data[i]) - b[p].data[i]);
    acc += lvl / static_cast<double>(a[p].data.size());
  }
  return acc / static_cast<double>(a.size());
}

double gram_l1(const std::vector<FeatureMap>& a,
               const std::vector<FeatureMap>& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("feature stacks disagree in depth");
  double acc = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const std::vector<double> ga = gram(a[p]);
    const std::vector<double> gb = gram(b[p]);
    if (ga.size() != gb.size())
      throw DimensionMismatch("gram matrices disagree in size");
    double lvl = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) lvl += std::abs(ga[i] - gb[i]);
    acc += lvl / static_cast<double>(ga.size());
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace

double l_perceptual(const SequenceSample& s, const FeatureExtractor& phi) {
  s.validate();
  double acc = 0.0;
  for (std::size_t t = 0; t < s.x.size(); ++t)
    acc += feature_l1(phi(y_comb(s.y[t], s.x[t], s.m[t])), phi(s.gt[t]));
  return acc / static_cast<double>(s.frames());
}

double l_style(const SequenceSample& s, const FeatureExtractor& phi) {
  s.validate();
  double acc = 0.0;
  for (std::size_t t = 0; t < s.x.size(); ++t)
    acc += gram_l1(phi(y_comb(s.y[t], s.x[t], s.m[t])), phi(s.gt[t]));
  return acc / static_cast<double>(s.frames());
}

double l_rec(const std::vector<Frame>& x_tilde, const std::vector<Frame>& x,
             const std::vector<Mask>& leftover) {
  if (x_tilde.empty()) throw std::invalid_argument("empty sequence");
  if (x.size() != x_tilde.size() || leftover.size() != x_tilde.size())
    throw std::invalid_argument("reconstruction lists disagree in length");
  double acc = 0.0;
  for (std::size_t t = 0; t < x_tilde.size(); ++t) {
    acc += weighted_l1(x_tilde[t], x[t], leftover[t]);
    acc += weighted_l1(x_tilde[t], x[t], invert(leftover[t]));
  }
  return acc / static_cast<double>(x_tilde.size());
}

double l_adv(const std::vector<Frame>& x_tilde, const Critic& critic) {
  if (x_tilde.empty()) throw std::invalid_argument("empty sequence");
  double acc = 0.0;
  for (const Frame& f : x_tilde) acc += critic(f);
  return -acc / static_cast<double>(x_tilde.size());
}

double total(const LossBreakdown& l, const LossWeights& w) {
  return w.align * l.align + w.visible * l.visible + w.leftover * l.leftover +
         w.non_hole * l.non_hole + w.perceptual * l.perceptual +
         w.style * l.style + w.reconstruction * l.reconstruction +
         w.adversarial * l.adversarial;
}

LossBreakdown compute_losses(const SequenceSample& s,
                             const std::vector<std::vector<AlignedReference>>& refs,
                             const std::vector<Mask>& c_visible,
                             const std::vector<Mask>& leftover,
                             const std::vector<Frame>& x_tilde,
                             const FeatureExtractor& phi, const Critic& critic) {
  LossBreakdown out;
  out.align = l_align(s, refs);
  out.visible = l_hole_visible(s, c_visible);
  out.leftover = l_hole_leftover(s, leftover);
  out.non_hole = l_non_hole(s);
  out.perceptual = l_perceptual(s, phi);
  out.style = l_style(s, phi);
  out.reconstruction = l_rec(x_tilde, s.x, leftover);
  out.adversarial = l_adv(x_tilde, critic);
  return out;
}

}  // namespace strav
