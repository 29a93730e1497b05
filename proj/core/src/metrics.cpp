#include "uwie/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace uwie {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

template <typename T>
void require_pair(const BasicImage<T>& a, const BasicImage<T>& b, const char* what) {
  require(a.shape() == b.shape(), std::string(what) + ": shape " + to_string(a.shape()) +
                                      " != " + to_string(b.shape()));
}

template <typename T>
void require_rgb(const BasicImage<T>& img, const char* what) {
  require(img.channels() == 3,
          std::string(what) + ": expected a 3-channel image, got " + to_string(img.shape()));
}

// A single channel as a dense double plane.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> v;

  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

template <typename T>
Plane channel_plane(const BasicImage<T>& img, int c, double scale, bool clamp) {
  Plane p{img.height(), img.width(), std::vector<double>(static_cast<std::size_t>(img.height()) * img.width())};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double v = static_cast<double>(img(y, x, c));
      if (clamp) v = clamp01(v);
      p.at(y, x) = v * scale;
    }
  }
  return p;
}

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> g{};
  const int r = kSsimWindow / 2;
  double sum = 0.0;
  for (int k = 0; k < kSsimWindow; ++k) {
    const double d = k - r;
    g[k] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[k];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable Gaussian filter evaluated only where the window fits ("valid" region).
Plane blur_valid(const Plane& in, const std::array<double, kSsimWindow>& g) {
  const int oh = in.height - kSsimWindow + 1;
  const int ow = in.width - kSsimWindow + 1;
  Plane horiz{in.height, ow, std::vector<double>(static_cast<std::size_t>(in.height) * ow)};
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * in.at(y, x + k);
      horiz.at(y, x) = s;
    }
  }
  Plane out{oh, ow, std::vector<double>(static_cast<std::size_t>(oh) * ow)};
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * horiz.at(y + k, x);
      out.at(y, x) = s;
    }
  }
  return out;
}

Plane multiply(const Plane& a, const Plane& b) {
  Plane out{a.height, a.width, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  if (t > delta * delta * delta) return std::cbrt(t);
  return t / (3.0 * delta * delta) + 4.0 / 29.0;
}

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

// Replicate-border Sobel gradient magnitude.
Plane sobel_magnitude(const Plane& p) {
  Plane out{p.height, p.width, std::vector<double>(p.v.size())};
  auto px = [&](int y, int x) {
    y = std::clamp(y, 0, p.height - 1);
    x = std::clamp(x, 0, p.width - 1);
    return p.at(y, x);
  };
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double gx = (px(y - 1, x + 1) - px(y - 1, x - 1)) +
                        2.0 * (px(y, x + 1) - px(y, x - 1)) +
                        (px(y + 1, x + 1) - px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) - px(y - 1, x - 1)) +
                        2.0 * (px(y + 1, x) - px(y - 1, x)) +
                        (px(y + 1, x + 1) - px(y - 1, x + 1));
      out.at(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

template <typename Fn>
void for_each_block(const Plane& p, Fn&& fn) {
  const int by = p.height / kUiqmBlock;
  const int bx = p.width / kUiqmBlock;
  for (int j = 0; j < by; ++j) {
    for (int i = 0; i < bx; ++i) {
      double lo = p.at(j * kUiqmBlock, i * kUiqmBlock);
      double hi = lo;
      for (int y = j * kUiqmBlock; y < (j + 1) * kUiqmBlock; ++y) {
        for (int x = i * kUiqmBlock; x < (i + 1) * kUiqmBlock; ++x) {
          lo = std::min(lo, p.at(y, x));
          hi = std::max(hi, p.at(y, x));
        }
      }
      fn(lo, hi);
    }
  }
}

double block_count(const Plane& p) {
  return static_cast<double>(p.height / kUiqmBlock) * static_cast<double>(p.width / kUiqmBlock);
}

// Measure of enhancement: (2 / blocks) * sum log(max / min).
double eme(const Plane& p) {
  double sum = 0.0;
  for_each_block(p, [&](double lo, double hi) {
    if (lo > 0.0 && hi > 0.0) sum += std::log(hi / lo);
  });
  return 2.0 * sum / block_count(p);
}

// Logarithmic AMEE with PLIP subtraction and addition.
double log_amee(const Plane& p) {
  double sum = 0.0;
  for_each_block(p, [&](double lo, double hi) {
    const double top = kPlipGamma * (hi - lo) / (kPlipGamma - lo);
    const double bottom = hi + lo - hi * lo / kPlipGamma;
    if (top == 0.0 || bottom == 0.0 || !std::isfinite(top) || !std::isfinite(bottom)) return;
    const double r = top / bottom;
    sum += r * std::log(r);
  });
  return -sum / block_count(p);
}

struct TrimmedStats {
  double mean = 0.0;
  double variance = 0.0;
};

TrimmedStats alpha_trimmed(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const auto lo = static_cast<std::size_t>(std::ceil(kUicmTrim * static_cast<double>(n)));
  const auto hi = static_cast<std::size_t>(std::floor(kUicmTrim * static_cast<double>(n)));
  TrimmedStats s;
  if (lo + hi < n) {
    double sum = 0.0;
    for (std::size_t i = lo; i < n - hi; ++i) sum += values[i];
    s.mean = sum / static_cast<double>(n - lo - hi);
  }
  double var = 0.0;
  for (const double v : values) var += (v - s.mean) * (v - s.mean);
  s.variance = var / static_cast<double>(n);
  return s;
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(12) << v;
  return out.str();
}

}  // namespace

template <typename T>
double psnr(const BasicImage<T>& a, const BasicImage<T>& b) {
  require_pair(a, b, "psnr");
  const auto da = a.data();
  const auto db = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = clamp01(static_cast<double>(da[i])) - clamp01(static_cast<double>(db[i]));
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(da.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse);
}

template <typename T>
double ssim(const BasicImage<T>& a, const BasicImage<T>& b) {
  require_pair(a, b, "ssim");
  require(a.height() >= kSsimWindow && a.width() >= kSsimWindow,
          "ssim: image " + to_string(a.shape()) + " is smaller than the 11x11 window");
  const auto g = gaussian_taps();
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    const Plane pa = channel_plane(a, c, 1.0, true);
    const Plane pb = channel_plane(b, c, 1.0, true);
    const Plane mu_a = blur_valid(pa, g);
    const Plane mu_b = blur_valid(pb, g);
    const Plane e_aa = blur_valid(multiply(pa, pa), g);
    const Plane e_bb = blur_valid(multiply(pb, pb), g);
    const Plane e_ab = blur_valid(multiply(pa, pb), g);
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
      const double ma = mu_a.v[i];
      const double mb = mu_b.v[i];
      const double var_a = e_aa.v[i] - ma * ma;
      const double var_b = e_bb.v[i] - mb * mb;
      const double cov = e_ab.v[i] - ma * mb;
      const double num = (2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2);
      const double den = (ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

Lab srgb_to_lab(double r, double g, double b) {
  const double rl = srgb_to_linear(r);
  const double gl = srgb_to_linear(g);
  const double bl = srgb_to_linear(b);
  // sRGB primaries; the D65 white point is taken as the image of RGB (1,1,1) so white maps to
  // L* = 100 exactly (the standard Y row sums to 1.0000001).
  constexpr double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                              {0.2126729, 0.7151522, 0.0721750},
                              {0.0193339, 0.1191920, 0.9503041}};
  auto row = [&](int k) { return m[k][0] * rl + m[k][1] * gl + m[k][2] * bl; };
  auto white = [&](int k) { return m[k][0] + m[k][1] + m[k][2]; };
  const double x = row(0) / white(0);
  const double y = row(1) / white(1);
  const double z = row(2) / white(2);
  const double fy = lab_f(y);
  Lab lab{116.0 * fy - 16.0, 0.0, 0.0};
  if (!(r == g && g == b)) {
    lab.a = 500.0 * (lab_f(x) - fy);
    lab.b = 200.0 * (fy - lab_f(z));
  }
  return lab;
}

template <typename T>
UciqeTerms uciqe_terms(const BasicImage<T>& image) {
  require_rgb(image, "uciqe");
  const std::size_t n = static_cast<std::size_t>(image.height()) * image.width();
  std::vector<double> lum(n);
  std::vector<double> chroma(n);
  double sat_sum = 0.0;
  std::size_t i = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x, ++i) {
      const Lab lab = srgb_to_lab(clamp01(image(y, x, 0)), clamp01(image(y, x, 1)),
                                  clamp01(image(y, x, 2)));
      lum[i] = lab.l;
      chroma[i] = std::sqrt(lab.a * lab.a + lab.b * lab.b);
      if (lab.l >= kUciqeMinLuminance) sat_sum += chroma[i] / lab.l;
    }
  }
  UciqeTerms terms;
  double mean = 0.0;
  for (const double c : chroma) mean += c;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double c : chroma) var += (c - mean) * (c - mean);
  terms.chroma_std = std::sqrt(var / static_cast<double>(n));

  std::sort(lum.begin(), lum.end());
  const std::size_t k = std::max<std::size_t>(1, n / 100);
  double top = 0.0;
  double bottom = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    bottom += lum[j];
    top += lum[n - 1 - j];
  }
  terms.luminance_contrast = top / static_cast<double>(k) - bottom / static_cast<double>(k);
  terms.saturation_mean = sat_sum / static_cast<double>(n);
  return terms;
}

template <typename T>
double uciqe(const BasicImage<T>& image) {
  const auto t = uciqe_terms(image);
  return kUciqeWeights[0] * t.chroma_std + kUciqeWeights[1] * t.luminance_contrast +
         kUciqeWeights[2] * t.saturation_mean;
}

template <typename T>
UiqmTerms uiqm_terms(const BasicImage<T>& image) {
  require_rgb(image, "uiqm");
  require(image.height() >= 2 * kUiqmBlock && image.width() >= 2 * kUiqmBlock,
          "uiqm: image " + to_string(image.shape()) + " is too small for 8x8 blocking");
  const Plane r = channel_plane(image, 0, 255.0, true);
  const Plane g = channel_plane(image, 1, 255.0, true);
  const Plane b = channel_plane(image, 2, 255.0, true);

  UiqmTerms terms;
  {
    std::vector<double> rg(r.v.size());
    std::vector<double> yb(r.v.size());
    for (std::size_t i = 0; i < r.v.size(); ++i) {
      rg[i] = r.v[i] - g.v[i];
      yb[i] = (r.v[i] + g.v[i]) / 2.0 - b.v[i];
    }
    const auto srg = alpha_trimmed(std::move(rg));
    const auto syb = alpha_trimmed(std::move(yb));
    terms.uicm = kUicmWeights[0] * std::sqrt(srg.mean * srg.mean + syb.mean * syb.mean) +
                 kUicmWeights[1] * std::sqrt(srg.variance + syb.variance);
  }
  {
    constexpr double luma[3] = {0.299, 0.587, 0.114};
    const Plane* channels[3] = {&r, &g, &b};
    for (int c = 0; c < 3; ++c) {
      const Plane edges = multiply(sobel_magnitude(*channels[c]), *channels[c]);
      terms.uism += luma[c] * eme(edges);
    }
  }
  {
    Plane intensity{r.height, r.width, std::vector<double>(r.v.size())};
    for (std::size_t i = 0; i < r.v.size(); ++i) {
      intensity.v[i] = 0.299 * r.v[i] + 0.587 * g.v[i] + 0.114 * b.v[i];
    }
    terms.uiconm = log_amee(intensity);
  }
  return terms;
}

template <typename T>
double uiqm(const BasicImage<T>& image) {
  const auto t = uiqm_terms(image);
  return kUiqmWeights[0] * t.uicm + kUiqmWeights[1] * t.uism + kUiqmWeights[2] * t.uiconm;
}

MetricReport evaluate_pairs(const std::vector<NamedImage>& outputs,
                            const std::vector<NamedImage>* references) {
  if (outputs.empty()) throw ConfigError("no output images to evaluate");
  if (references && references->size() != outputs.size()) {
    throw ConfigError("got " + std::to_string(outputs.size()) + " outputs but " +
                      std::to_string(references->size()) + " references");
  }
  MetricReport report;
  report.has_reference = references != nullptr;
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  double uciqe_sum = 0.0;
  double uiqm_sum = 0.0;
  std::size_t finite_psnr = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& out = outputs[i];
    MetricRecord rec;
    rec.id = out.id;
    if (references) {
      const auto& ref = (*references)[i];
      if (ref.id != out.id) {
        throw ConfigError("output '" + out.id + "' is aligned with reference '" + ref.id + "'");
      }
      if (ref.image.shape() != out.image.shape()) {
        throw ConfigError("output '" + out.id + "' and its reference differ in size");
      }
      rec.psnr = psnr(out.image, ref.image);
      rec.ssim = ssim(out.image, ref.image);
      if (rec.psnr_infinite()) {
        ++report.means.psnr_infinite_count;
      } else {
        psnr_sum += *rec.psnr;
        ++finite_psnr;
      }
      ssim_sum += *rec.ssim;
    }
    rec.uciqe = uciqe(out.image);
    rec.uiqm = uiqm(out.image);
    uciqe_sum += rec.uciqe;
    uiqm_sum += rec.uiqm;
    report.records.push_back(std::move(rec));
  }
  const double n = static_cast<double>(outputs.size());
  if (references) {
    if (finite_psnr > 0) report.means.psnr = psnr_sum / static_cast<double>(finite_psnr);
    report.means.ssim = ssim_sum / n;
  }
  report.means.uciqe = uciqe_sum / n;
  report.means.uiqm = uiqm_sum / n;
  return report;
}

std::string report_to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << (report.has_reference ? "id,psnr,ssim,uciqe,uiqm\n" : "id,uciqe,uiqm\n");
  for (const auto& r : report.records) {
    out << r.id << ',';
    if (report.has_reference) {
      out << (r.psnr_infinite() ? std::string("inf") : format_number(r.psnr.value_or(0.0)))
          << ',' << format_number(r.ssim.value_or(0.0)) << ',';
    }
    out << format_number(r.uciqe) << ',' << format_number(r.uiqm) << '\n';
  }
  return out.str();
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::ordered_json doc;
  auto records = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    nlohmann::ordered_json rec;
    rec["id"] = r.id;
    if (report.has_reference) {
      if (r.psnr_infinite()) {
        rec["psnr"] = "inf";
      } else {
        rec["psnr"] = r.psnr.value_or(0.0);
      }
      rec["ssim"] = r.ssim.value_or(0.0);
    }
    rec["uciqe"] = r.uciqe;
    rec["uiqm"] = r.uiqm;
    records.push_back(std::move(rec));
  }
  doc["records"] = std::move(records);
  nlohmann::ordered_json means;
  if (report.has_reference) {
    means["psnr"] = report.means.psnr ? nlohmann::ordered_json(*report.means.psnr)
                                      : nlohmann::ordered_json("inf");
    means["ssim"] = report.means.ssim.value_or(0.0);
    means["psnr_infinite_count"] = report.means.psnr_infinite_count;
  }
  means["uciqe"] = report.means.uciqe;
  means["uiqm"] = report.means.uiqm;
  doc["means"] = std::move(means);
  return doc.dump(2) + "\n";
}

#define UWIE_INSTANTIATE_METRICS(T)                                           \
  template double psnr(const BasicImage<T>&, const BasicImage<T>&);          \
  template double ssim(const BasicImage<T>&, const BasicImage<T>&);          \
  template UciqeTerms uciqe_terms(const BasicImage<T>&);                      \
  template double uciqe(const BasicImage<T>&);                                \
  template UiqmTerms uiqm_terms(const BasicImage<T>&);                        \
  template double uiqm(const BasicImage<T>&);

UWIE_INSTANTIATE_METRICS(float)
UWIE_INSTANTIATE_METRICS(double)

#undef UWIE_INSTANTIATE_METRICS

}  // namespace uwie
