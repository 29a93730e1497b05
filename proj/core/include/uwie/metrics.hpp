#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "uwie/tensor.hpp"

namespace uwie {

// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) with peak 1.0, after clamping both images to [0, 1].
template <typename T>
double psnr(const BasicImage<T>& a, const BasicImage<T>& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Gaussian-windowed SSIM (11x11, sigma 1.5) over every window fully inside the image, averaged
// over windows and channels. Inputs are clamped to [0, 1]. Requires min(H, W) >= 11.
template <typename T>
double ssim(const BasicImage<T>& a, const BasicImage<T>& b);

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// sRGB in [0,1] -> CIELab (D65). Achromatic input (r == g == b) maps to a* = b* = 0 exactly.
Lab srgb_to_lab(double r, double g, double b);

inline constexpr double kUciqeWeights[3] = {0.4680, 0.2745, 0.2576};
inline constexpr double kUciqeMinLuminance = 1e-6;

struct UciqeTerms {
  double chroma_std = 0.0;          // std of sqrt(a*^2 + b*^2)
  double luminance_contrast = 0.0;  // mean of top 1% L* - mean of bottom 1% L*
  double saturation_mean = 0.0;     // mean of chroma / L*
};

template <typename T>
UciqeTerms uciqe_terms(const BasicImage<T>& image);
template <typename T>
double uciqe(const BasicImage<T>& image);

inline constexpr double kUiqmWeights[3] = {0.0282, 0.2953, 3.5753};
inline constexpr double kUicmWeights[2] = {-0.0268, 0.1586};
inline constexpr double kUicmTrim = 0.1;
inline constexpr int kUiqmBlock = 8;
inline constexpr double kPlipGamma = 1026.0;

struct UiqmTerms {
  double uicm = 0.0;    // colourfulness
  double uism = 0.0;    // sharpness
  double uiconm = 0.0;  // contrast
};

// Computed on the 0..255 scale. Requires min(H, W) >= 2 * kUiqmBlock; partial blocks at the
// right and bottom edges are discarded.
template <typename T>
UiqmTerms uiqm_terms(const BasicImage<T>& image);
template <typename T>
double uiqm(const BasicImage<T>& image);

struct NamedImage {
  std::string id;
  Image image;
};

struct MetricRecord {
  std::string id;
  std::optional<double> psnr;  // may be kInfinitePsnr
  std::optional<double> ssim;
  double uciqe = 0.0;
  double uiqm = 0.0;

  bool psnr_infinite() const { return psnr && *psnr == kInfinitePsnr; }
};

struct MetricMeans {
  std::optional<double> psnr;  // over finite entries only
  std::optional<double> ssim;
  double uciqe = 0.0;
  double uiqm = 0.0;
  std::size_t psnr_infinite_count = 0;
};

struct MetricReport {
  bool has_reference = false;
  std::vector<MetricRecord> records;
  MetricMeans means;
};

// Scores every output; when `references` is given it must align with `outputs` by position
// and id. Throws ConfigError on an empty list or misaligned ids.
MetricReport evaluate_pairs(const std::vector<NamedImage>& outputs,
                            const std::vector<NamedImage>* references = nullptr);

// Header id,psnr,ssim,uciqe,uiqm (id,uciqe,uiqm without references); infinite PSNR as "inf".
std::string report_to_csv(const MetricReport& report);
std::string report_to_json(const MetricReport& report);

}  // namespace uwie
