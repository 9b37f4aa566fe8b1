#include "ddg/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddg/serialize.hpp"

namespace ddg {

namespace {

constexpr std::uint64_t kMotifStream = 0x4d4f544946ULL;   // "MOTIF"
constexpr std::uint64_t kNoiseStream = 0x4e4f495345ULL;   // "NOISE"
constexpr std::uint64_t kSplitStream = 0x53504c4954ULL;   // "SPLIT"
constexpr std::uint64_t kBatchStream = 0x4241544348ULL;   // "BATCH"
constexpr double kPatternAmplitude = 0.1;

void validate_manifest(const DatasetManifest& m) {
  if (m.classes < 2) throw std::invalid_argument("manifest: need at least 2 classes");
  if (m.domains < 3) throw std::invalid_argument("manifest: need at least 3 domains");
  if (m.samples_per_domain < 1)
    throw std::invalid_argument("manifest: samples_per_domain must be positive");
  if (m.image_side < 1 || m.patch_size < 1 || m.image_side % m.patch_size != 0)
    throw std::invalid_argument("manifest: image side must be divisible by patch size");
}

void draw_hbar(std::vector<double>& img, int s, int center, int thickness, double v) {
  for (int r = std::max(0, center - thickness); r <= std::min(s - 1, center + thickness); ++r)
    for (int c = 0; c < s; ++c) img[r * s + c] = v;
}

void draw_vbar(std::vector<double>& img, int s, int center, int thickness, double v) {
  for (int c = std::max(0, center - thickness); c <= std::min(s - 1, center + thickness); ++c)
    for (int r = 0; r < s; ++r) img[r * s + c] = v;
}

void draw_diag(std::vector<double>& img, int s, int offset, int thickness, double v) {
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      if (std::abs(r - c + offset) <= thickness) img[r * s + c] = v;
}

void draw_disc(std::vector<double>& img, int s, int cr, int cc, int radius, double v) {
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius)
        img[r * s + c] = v;
}

void draw_frame(std::vector<double>& img, int s, int inset, int thickness, double v) {
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      const int d = std::min(std::min(r, s - 1 - r), std::min(c, s - 1 - c));
      if (d >= inset && d < inset + thickness) img[r * s + c] = v;
    }
}

}  // namespace

std::vector<double> render_motif(const DatasetManifest& manifest, int label,
                                 int instance_index) {
  const int s = manifest.image_side;
  std::vector<double> img(static_cast<std::size_t>(s) * s, 0.0);
  Rng rng(Rng::derive(Rng::derive(manifest.seed, kMotifStream),
                      static_cast<std::uint64_t>(instance_index)));
  // mild instance variation: position jitter and intensity, class-independent
  const int jitter = static_cast<int>(rng.uniform_index(5)) - 2;
  const double intensity = 0.7 + 0.3 * rng.uniform();
  const int mid = s / 2;
  switch (label % 5) {
    case 0:
      draw_hbar(img, s, mid + jitter, s / 10 + 1, intensity);
      break;
    case 1:
      draw_vbar(img, s, mid + jitter, s / 10 + 1, intensity);
      break;
    case 2:
      draw_hbar(img, s, mid + jitter, s / 14 + 1, intensity);
      draw_vbar(img, s, mid - jitter, s / 14 + 1, intensity);
      break;
    case 3:
      draw_diag(img, s, jitter, s / 10 + 1, intensity);
      break;
    default:
      draw_disc(img, s, mid + jitter, mid - jitter, s / 4, intensity);
      break;
  }
  // classes beyond the base five add a frame so they stay distinguishable
  if (label >= 5) draw_frame(img, s, 1 + (label / 5), 2, intensity);
  return img;
}

double pattern_value(const DomainSpec& spec, int row, int col) {
  switch (spec.pattern) {
    case 0:
      return 0.0;
    case 1:
      return (row / 2) % 2 == 0 ? kPatternAmplitude : 0.0;
    case 2:
      return (col / 2) % 2 == 0 ? kPatternAmplitude : 0.0;
    case 3:
      return ((row / 2) + (col / 2)) % 2 == 0 ? kPatternAmplitude : 0.0;
    default:
      throw std::invalid_argument("unknown background pattern id");
  }
}

DomainDataset generate(const DatasetManifest& manifest,
                       const std::vector<DomainSpec>& specs) {
  validate_manifest(manifest);
  if (static_cast<int>(specs.size()) != manifest.domains)
    throw std::invalid_argument("generate: one DomainSpec per domain required");
  for (const auto& spec : specs) {
    if (spec.gain <= 0.0) throw std::invalid_argument("generate: gain must be positive");
    if (spec.noise_amplitude < 0.0)
      throw std::invalid_argument("generate: noise amplitude must be nonnegative");
  }
  DomainDataset ds;
  ds.manifest = manifest;
  ds.specs = specs;
  const int s = manifest.image_side;
  ds.samples.reserve(static_cast<std::size_t>(manifest.domains) *
                     manifest.samples_per_domain);
  for (int dom = 0; dom < manifest.domains; ++dom) {
    const DomainSpec& spec = specs[dom];
    for (int i = 0; i < manifest.samples_per_domain; ++i) {
      Sample sample;
      sample.label = i % manifest.classes;  // balanced classes
      sample.domain = dom;
      sample.image = render_motif(manifest, sample.label, i);
      Rng noise(Rng::derive(Rng::derive(manifest.seed, kNoiseStream),
                            static_cast<std::uint64_t>(dom) * 1000003ULL +
                                static_cast<std::uint64_t>(i)));
      for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) {
          double& px = sample.image[r * s + c];
          px = spec.gain * px + spec.bias + pattern_value(spec, r, c) +
               spec.noise_amplitude * noise.normal();
        }
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

std::vector<DomainSpec> default_domain_specs(int domains) {
  std::vector<DomainSpec> specs(domains);
  for (int d = 0; d < domains; ++d) {
    specs[d].domain_id = d;
    specs[d].gain = 0.7 + 0.25 * d;
    specs[d].bias = 0.08 * d;
    specs[d].noise_amplitude = 0.03 + 0.02 * d;
    specs[d].pattern = d % 4;
  }
  return specs;
}

SplitIndices split_train_val(const DomainDataset& dataset, const std::vector<int>& domains,
                             double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("split_train_val: fraction must lie in (0,1)");
  SplitIndices out;
  for (int dom : domains) {
    for (int cls = 0; cls < dataset.manifest.classes; ++cls) {
      std::vector<int> stratum;
      for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        if (dataset.samples[i].domain == dom && dataset.samples[i].label == cls)
          stratum.push_back(static_cast<int>(i));
      if (stratum.empty()) continue;
      Rng rng(Rng::derive(Rng::derive(seed, kSplitStream),
                          static_cast<std::uint64_t>(dom) * 1000003ULL +
                              static_cast<std::uint64_t>(cls)));
      for (std::size_t i = stratum.size(); i > 1; --i)
        std::swap(stratum[i - 1], stratum[rng.uniform_index(i)]);
      const auto n_val = static_cast<std::size_t>(
          std::llround(fraction * static_cast<double>(stratum.size())));
      for (std::size_t i = 0; i < stratum.size(); ++i)
        (i < n_val ? out.val : out.train).push_back(stratum[i]);
    }
  }
  if (out.train.empty() || out.val.empty())
    throw std::invalid_argument("split_train_val: split produced an empty side");
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

Batches::Batches(std::vector<int> indices, int batch_size, std::uint64_t epoch_seed)
    : order_(std::move(indices)), batch_size_(batch_size) {
  if (batch_size_ < 1) throw std::invalid_argument("Batches: batch_size must be >= 1");
  Rng rng(Rng::derive(epoch_seed, kBatchStream));
  for (std::size_t i = order_.size(); i > 1; --i)
    std::swap(order_[i - 1], order_[rng.uniform_index(i)]);
}

bool Batches::next(std::vector<int>& out) {
  out.clear();
  if (cursor_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  out.assign(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return true;
}

namespace {
constexpr char kDatasetMagic[9] = "DDGDAT01";
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void write_dataset(const std::string& path, const DomainDataset& dataset) {
  BinaryWriter w;
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  const DatasetManifest& m = dataset.manifest;
  w.u64(m.seed);
  w.u32(m.classes);
  w.u32(m.domains);
  w.u32(m.samples_per_domain);
  w.u32(m.image_side);
  w.u32(m.patch_size);
  for (const auto& spec : dataset.specs) {
    w.u32(spec.domain_id);
    w.f64(spec.gain);
    w.f64(spec.bias);
    w.f64(spec.noise_amplitude);
    w.u32(spec.pattern);
  }
  for (const auto& sample : dataset.samples) {
    w.u8(static_cast<std::uint8_t>(sample.label));
    w.u8(static_cast<std::uint8_t>(sample.domain));
    for (double px : sample.image) w.f64(px);
  }
  w.save(path);
}

DomainDataset read_dataset(const std::string& path) {
  BinaryReader r = BinaryReader::load(path);
  r.expect_magic(kDatasetMagic);
  if (r.u32() != kDatasetVersion) throw std::runtime_error("unsupported dataset version");
  DomainDataset ds;
  ds.manifest.seed = r.u64();
  ds.manifest.classes = static_cast<int>(r.u32());
  ds.manifest.domains = static_cast<int>(r.u32());
  ds.manifest.samples_per_domain = static_cast<int>(r.u32());
  ds.manifest.image_side = static_cast<int>(r.u32());
  ds.manifest.patch_size = static_cast<int>(r.u32());
  ds.specs.resize(ds.manifest.domains);
  for (auto& spec : ds.specs) {
    spec.domain_id = static_cast<int>(r.u32());
    spec.gain = r.f64();
    spec.bias = r.f64();
    spec.noise_amplitude = r.f64();
    spec.pattern = static_cast<int>(r.u32());
  }
  const std::size_t n = static_cast<std::size_t>(ds.manifest.domains) *
                        ds.manifest.samples_per_domain;
  const std::size_t pixels = static_cast<std::size_t>(ds.manifest.image_side) *
                             ds.manifest.image_side;
  ds.samples.resize(n);
  for (auto& sample : ds.samples) {
    sample.label = r.u8();
    sample.domain = r.u8();
    sample.image.resize(pixels);
    for (double& px : sample.image) px = r.f64();
  }
  if (!r.at_end()) throw std::runtime_error("trailing bytes in dataset file");
  return ds;
}

}  // namespace ddg
