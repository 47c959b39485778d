#include <algorithm>
#include <chrono>

#include "pyrexpose/autodiff/tensor.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/imaging.hpp"
#include "pyrexpose/infer.hpp"
#include "pyrexpose/tensor_image.hpp"

namespace pyrexpose {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Box-halves while the image is at least twice the target, then finishes
// bilinearly, so large reductions do not alias.
Image shrink(const Image& img, int th, int tw) {
  Image cur = img;
  while (cur.height() >= 2 * th && cur.width() >= 2 * tw) {
    const int h = cur.height() / 2, w = cur.width() / 2;
    Image half(h, w, cur.space());
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          half.at(c, y, x) = 0.25f * (cur.at(c, 2 * y, 2 * x) + cur.at(c, 2 * y, 2 * x + 1) +
                                      cur.at(c, 2 * y + 1, 2 * x) + cur.at(c, 2 * y + 1, 2 * x + 1));
        }
    cur = std::move(half);
  }
  if (cur.height() == th && cur.width() == tw) return cur;
  return resize_bilinear(cur, th, tw);
}

}  // namespace

Image correct_direct(const Image& img, const Model<float>& model, const ScaleVector& s) {
  if (img.empty()) throw InvalidInput("correct: empty image");
  const int n = model.config.levels;
  if (s.size() != n) {
    throw InvalidInput("correct: scale vector has " + std::to_string(s.size()) + " entries for " + std::to_string(n) +
                       " pyramid levels");
  }
  s.validate();
  const int m = model.config.size_multiple();
  const int h = img.height(), w = img.width();
  const int ph = (m - h % m) % m, pw = (m - w % m) % m;
  const Image padded = (ph || pw) ? pad_reflect(img, ph, pw) : img;

  const Pyramid pyr = laplacian_decompose(padded, n);
  const auto levels = pyramid_tensors<float>(std::span<const Pyramid>(&pyr, 1));
  ad::Graph<float> g(false);
  const ad::Tensor<float> y = model.generator.forward(g, levels, s).y;
  Image out = to_image(y, 0, img.space());
  if (ph || pw) out = crop(out, 0, 0, h, w);
  return out.clamped();
}

Image correct(const Image& img, const Model<float>& model, const ScaleVector& s, int max_dim,
              CorrectTimings* timings) {
  if (max_dim < 1) throw InvalidInput("correct: max_dim must be positive");
  const auto start = Clock::now();
  CorrectTimings t;
  Image out;
  if (std::max(img.height(), img.width()) <= max_dim) {
    out = correct_direct(img, model, s);
    t.network_ms = elapsed_ms(start);
  } else {
    const auto [lh, lw] = fit_within(img.height(), img.width(), max_dim);
    const Image low = shrink(img, lh, lw);
    const auto net_start = Clock::now();
    const Image low_out = correct_direct(low, model, s);
    t.network_ms = elapsed_ms(net_start);
    const auto bgu_start = Clock::now();
    out = bgu_apply(bgu_fit(low, low_out), img);
    t.bgu_ms = elapsed_ms(bgu_start);
    t.used_bgu = true;
  }
  t.total_ms = elapsed_ms(start);
  if (timings) *timings = t;
  return out;
}

Image correct(const Image& img, const Checkpoint& checkpoint, const ScaleVector& s, int max_dim,
              CorrectTimings* timings) {
  const Model<float> model = model_from_checkpoint<float>(checkpoint);
  return correct(img, model, s, max_dim, timings);
}

}  // namespace pyrexpose
