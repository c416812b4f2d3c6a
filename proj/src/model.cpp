#include "cmsep/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cmsep::model {

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (num_down != num_up) fail("num_down must equal num_up");
  if (num_down < 0) fail("num_down must be non-negative");
  if (num_dense_blocks != 2 * num_down + 1)
    fail("num_dense_blocks must be 2*num_down+1 (" + std::to_string(2 * num_down + 1) + "), got " +
         std::to_string(num_dense_blocks));
  if (layers_per_block < 1) fail("layers_per_block must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) fail("kernel_size must be odd and positive");
  if (growth < 1) fail("growth must be positive");
  if (reorg_channels < 1) fail("reorg_channels must be positive");
  if (input_channels != 2) fail("input_channels is fixed at 2 (real, imag)");
  if (num_sources != 2) fail("num_sources is fixed at 2");
  if (freq_bins < 1) fail("freq_bins must be positive");
  if (attention_channel_divisor < 1) fail("attention_channel_divisor must be positive");
  for (int b : resolved_attention_blocks()) {
    if (b < 0 || b >= num_dense_blocks) fail("attention block index out of range");
    const int channels = growth;
    if (channels % attention_channel_divisor != 0)
      fail("attention needs channels (" + std::to_string(channels) + ") divisible by " +
           std::to_string(attention_channel_divisor));
    const int scale = b <= num_down ? b : 2 * num_down - b;
    const int reduced = channels / attention_channel_divisor;
    const int bins = padded_bins() >> scale;
    if (attention_embed > reduced * bins)
      fail("attention_embed " + std::to_string(attention_embed) + " exceeds C'*F = " +
           std::to_string(reduced * bins));
  }
}

std::vector<int> ModelConfig::resolved_attention_blocks() const {
  if (!attention_blocks.empty()) return attention_blocks;
  std::vector<int> out;
  for (int scale = num_down - 1; scale >= std::max(0, num_down - 2); --scale) {
    out.push_back(scale);                 // encoder block at this scale
    out.push_back(2 * num_down - scale);  // decoder block at this scale
  }
  std::sort(out.begin(), out.end());
  return out;
}

int ModelConfig::padded_bins() const {
  const int unit = 1 << num_down;
  const int cells = std::max((freq_bins + unit - 1) / unit, kernel_size);
  return cells * unit;
}

int ModelConfig::padded_frames(int frames) const {
  const int unit = 1 << num_down;
  const int cells = std::max((frames + unit - 1) / unit, kernel_size);
  return cells * unit;
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "version = " << kVersion << "\n";
  os << "num_dense_blocks = " << num_dense_blocks << "\n";
  os << "layers_per_block = " << layers_per_block << "\n";
  os << "kernel_size = " << kernel_size << "\n";
  os << "growth = " << growth << "\n";
  os << "num_down = " << num_down << "\n";
  os << "num_up = " << num_up << "\n";
  os << "attention_channel_divisor = " << attention_channel_divisor << "\n";
  os << "attention_embed = " << attention_embed << "\n";
  os << "attention_blocks = ";
  if (attention_blocks.empty()) {
    os << "auto";
  } else {
    for (std::size_t i = 0; i < attention_blocks.size(); ++i)
      os << (i ? "," : "") << attention_blocks[i];
  }
  os << "\n";
  os << "reorg_channels = " << reorg_channels << "\n";
  os << "input_channels = " << input_channels << "\n";
  os << "num_sources = " << num_sources << "\n";
  os << "freq_bins = " << freq_bins << "\n";
  os << "normalize_input = " << (normalize_input ? 1 : 0) << "\n";
  return os.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ModelConfig ModelConfig::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("model config line " + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (!kv.count("version") || std::stoi(kv["version"]) != kVersion)
    throw std::invalid_argument("model config: missing or unsupported version");
  kv.erase("version");

  ModelConfig c;
  std::map<std::string, int*> ints{{"num_dense_blocks", &c.num_dense_blocks},
                                   {"layers_per_block", &c.layers_per_block},
                                   {"kernel_size", &c.kernel_size},
                                   {"growth", &c.growth},
                                   {"num_down", &c.num_down},
                                   {"num_up", &c.num_up},
                                   {"attention_channel_divisor", &c.attention_channel_divisor},
                                   {"attention_embed", &c.attention_embed},
                                   {"reorg_channels", &c.reorg_channels},
                                   {"input_channels", &c.input_channels},
                                   {"num_sources", &c.num_sources},
                                   {"freq_bins", &c.freq_bins}};
  for (const auto& [key, value] : kv) {
    if (auto it = ints.find(key); it != ints.end()) {
      *it->second = std::stoi(value);
    } else if (key == "normalize_input") {
      c.normalize_input = std::stoi(value) != 0;
    } else if (key == "attention_blocks") {
      c.attention_blocks.clear();
      if (value != "auto" && !value.empty()) {
        std::istringstream ls(value);
        std::string item;
        while (std::getline(ls, item, ',')) c.attention_blocks.push_back(std::stoi(trim(item)));
      }
    } else {
      throw std::invalid_argument("model config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void ModelConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model config: " + path.string());
  out << to_text();
}

// ---------------------------------------------------------------------------
// Building blocks

template <typename T>
ag::Tensor<T> DenseBlock<T>::forward_unpadded(const ag::Tensor<T>& x) const {
  if (x.dim(0) != in_channels)
    throw std::invalid_argument("dense block expects " + std::to_string(in_channels) +
                                " channels, got " + std::to_string(x.dim(0)));
  std::vector<ag::Tensor<T>> outputs{x};
  for (const auto& layer : layers) {
    ag::Tensor<T> input = outputs.size() == 1
                              ? x
                              : ag::concat(std::vector<ag::Tensor<T>>(outputs.rbegin(),
                                                                      outputs.rend()),
                                           0);
    outputs.push_back(ag::elu(layer(input)));
  }
  return outputs.back();
}

template <typename T>
ag::Tensor<T> DenseBlock<T>::forward(const ag::Tensor<T>& x) const {
  ag::Tensor<T> y = forward_unpadded(x);
  const std::size_t dh = x.dim(1) - y.dim(1);
  const std::size_t dw = x.dim(2) - y.dim(2);
  if (dh == 0 && dw == 0) return y;
  return ag::pad2d(y, dh / 2, dh - dh / 2, dw / 2, dw - dw / 2);
}

template <typename T>
ag::Tensor<T> AttentionModule<T>::forward(const ag::Tensor<T>& x, ag::Tensor<T>* beta) const {
  if (x.dim(0) != channels || x.dim(1) != bins)
    throw std::invalid_argument("attention expects [" + std::to_string(channels) + ", " +
                                std::to_string(bins) + ", T], got " + ag::to_string(x.shape()));
  const std::size_t frames = x.dim(2);
  const auto q = ag::matmul(query_proj,
                            ag::reshape(query_conv(x), {reduced_channels * bins, frames}));
  const auto k = ag::matmul(key_proj, ag::reshape(key_conv(x), {reduced_channels * bins, frames}));
  const auto v = ag::reshape(value_conv(x), {channels * bins, frames});
  // a_ij = Q(i)^T K(j); normalize over j.
  const auto weights = ag::softmax(ag::matmul(ag::transpose(q), k), 1);
  if (beta) *beta = weights;
  const auto attended = ag::matmul(v, ag::transpose(weights));
  return ag::concat<T>({x, ag::reshape(attended, {channels, bins, frames})}, 0);
}

template <typename T>
ag::Tensor<T> Upsample<T>::forward(const ag::Tensor<T>& x) const {
  return conv(ag::upsample_nearest2(x));
}

// ---------------------------------------------------------------------------
// SADenseUNet

namespace {

template <typename T>
class Init {
 public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}

  ConvLayer<T> conv(std::size_t in, std::size_t out, std::size_t k, kernels::Padding pad,
                    double gain) {
    ConvLayer<T> layer;
    layer.padding = pad;
    layer.weight = normal({out, in, k, k}, gain / std::sqrt(static_cast<double>(in * k * k)));
    layer.bias = ag::Tensor<T>::zeros({out}, true);
    return layer;
  }

  ag::Tensor<T> normal(ag::Shape shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<T> v(ag::numel(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng_));
    return ag::Tensor<T>::from(std::move(shape), std::move(v), true);
  }

 private:
  std::mt19937_64 rng_;
};

constexpr double kEluGain = 1.41421356237;

}  // namespace

template <typename T>
SADenseUNet<T>::SADenseUNet(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Init<T> init(seed);
  const int depth = config_.num_down;
  const auto k = static_cast<std::size_t>(config_.kernel_size);
  const auto growth = static_cast<std::size_t>(config_.growth);
  const auto attn = config_.resolved_attention_blocks();
  const auto padded_bins = static_cast<std::size_t>(config_.padded_bins());

  auto make_block = [&](std::size_t in) {
    DenseBlock<T> block;
    block.in_channels = in;
    for (int i = 0; i < config_.layers_per_block; ++i) {
      const std::size_t layer_in = in + static_cast<std::size_t>(i) * growth;
      const bool last = i + 1 == config_.layers_per_block;
      block.layers.push_back(init.conv(layer_in, growth, k,
                                       last ? kernels::Padding::Valid : kernels::Padding::Same,
                                       kEluGain));
    }
    return block;
  };
  auto make_attention = [&](std::size_t channels, int scale) {
    AttentionModule<T> m;
    m.channels = channels;
    m.reduced_channels = channels / static_cast<std::size_t>(config_.attention_channel_divisor);
    m.bins = padded_bins >> scale;
    const std::size_t flat = m.reduced_channels * m.bins;
    m.embed = config_.attention_embed > 0 ? static_cast<std::size_t>(config_.attention_embed)
                                          : std::max<std::size_t>(1, flat / 2);
    m.query_conv = init.conv(channels, m.reduced_channels, 1, kernels::Padding::Same, 1.0);
    m.key_conv = init.conv(channels, m.reduced_channels, 1, kernels::Padding::Same, 1.0);
    m.value_conv = init.conv(channels, channels, 1, kernels::Padding::Same, 1.0);
    m.query_proj = init.normal({m.embed, flat}, 1.0 / std::sqrt(static_cast<double>(flat)));
    m.key_proj = init.normal({m.embed, flat}, 1.0 / std::sqrt(static_cast<double>(flat)));
    return m;
  };

  std::size_t channels = static_cast<std::size_t>(config_.input_channels);
  std::vector<std::size_t> skip_channels;
  auto add_block = [&](int index, int scale) {
    blocks_.push_back(make_block(channels));
    channels = growth;
    if (std::find(attn.begin(), attn.end(), index) != attn.end()) {
      attention_slot_.push_back(static_cast<int>(attention_.size()));
      attention_.push_back(make_attention(channels, scale));
      channels *= 2;
    } else {
      attention_slot_.push_back(-1);
    }
  };

  for (int s = 0; s < depth; ++s) {
    add_block(s, s);
    skip_channels.push_back(channels);
  }
  add_block(depth, depth);
  for (int i = 0; i < depth; ++i) {
    const int scale = depth - 1 - i;
    Upsample<T> up;
    up.conv = init.conv(channels, channels, 3, kernels::Padding::Same, 1.0);
    upsamplers_.push_back(std::move(up));
    channels += skip_channels[static_cast<std::size_t>(scale)];
    add_block(depth + 1 + i, scale);
  }
  reorg_ = init.conv(channels, static_cast<std::size_t>(config_.reorg_channels), 1,
                     kernels::Padding::Same, kEluGain);
  for (auto& head : heads_)
    head = init.conv(static_cast<std::size_t>(config_.reorg_channels), 1, 1,
                     kernels::Padding::Same, 1.0);
}

template <typename T>
HeadOutputs<T> SADenseUNet<T>::forward(const ag::Tensor<T>& input,
                                       std::vector<ag::Tensor<T>>* attention_maps) const {
  if (input.rank() != 3 || input.dim(0) != 2 ||
      input.dim(1) != static_cast<std::size_t>(config_.freq_bins)) {
    throw std::invalid_argument("model input must be [2, " + std::to_string(config_.freq_bins) +
                                ", T], got " + ag::to_string(input.shape()));
  }
  const std::size_t bins = input.dim(1);
  const std::size_t frames = input.dim(2);
  const auto pbins = static_cast<std::size_t>(config_.padded_bins());
  const auto pframes = static_cast<std::size_t>(config_.padded_frames(static_cast<int>(frames)));

  HeadOutputs<T> out;
  ag::Tensor<T> x = input;
  if (config_.normalize_input) {
    double energy = 0.0;
    for (T v : input.values()) energy += static_cast<double>(v) * v;
    const double rms = std::sqrt(energy / static_cast<double>(input.numel()));
    if (rms > 1e-12) {
      out.input_scale = static_cast<T>(rms);
      x = ag::scale(x, static_cast<T>(1.0 / rms));
    }
  }
  x = ag::pad2d(x, 0, pbins - bins, 0, pframes - frames);

  auto run_block = [&](std::size_t index, const ag::Tensor<T>& in) {
    ag::Tensor<T> y = blocks_[index].forward(in);
    if (const int slot = attention_slot_[index]; slot >= 0) {
      ag::Tensor<T> beta;
      y = attention_[static_cast<std::size_t>(slot)].forward(y, &beta);
      if (attention_maps) attention_maps->push_back(beta);
    }
    return y;
  };

  const auto depth = static_cast<std::size_t>(config_.num_down);
  std::vector<ag::Tensor<T>> skips;
  for (std::size_t s = 0; s < depth; ++s) {
    x = run_block(s, x);
    skips.push_back(x);
    x = downsample(x);
  }
  x = run_block(depth, x);
  for (std::size_t i = 0; i < depth; ++i) {
    x = upsamplers_[i].forward(x);
    x = ag::concat<T>({x, skips[depth - 1 - i]}, 0);
    x = run_block(depth + 1 + i, x);
  }
  x = ag::elu(reorg_(x));
  auto head = [&](int i) { return ag::crop2d(heads_[i](x), 0, 0, bins, frames); };
  out.voice_real = head(0);
  out.voice_imag = head(1);
  out.acc_real = head(2);
  out.acc_imag = head(3);
  return out;
}

template <typename T>
std::pair<ComplexMask, ComplexMask> SADenseUNet<T>::estimate_masks(
    const ComplexSpectrogram& mixture) const {
  const HeadOutputs<T> h = forward(spectrogram_tensor<T>(mixture));
  ComplexMask voice, acc;
  voice.real = to_grid(h.voice_real);
  voice.imag = to_grid(h.voice_imag);
  acc.real = to_grid(h.acc_real);
  acc.imag = to_grid(h.acc_imag);
  return {std::move(voice), std::move(acc)};
}

template <typename T>
std::vector<NamedParameter<T>> SADenseUNet<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  auto conv = [&](const std::string& prefix, const ConvLayer<T>& c) {
    out.push_back({prefix + ".weight", c.weight});
    out.push_back({prefix + ".bias", c.bias});
  };
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b);
    for (std::size_t l = 0; l < blocks_[b].layers.size(); ++l)
      conv(prefix + ".layer" + std::to_string(l), blocks_[b].layers[l]);
  }
  for (std::size_t a = 0; a < attention_.size(); ++a) {
    const std::string prefix = "attention" + std::to_string(a);
    conv(prefix + ".query_conv", attention_[a].query_conv);
    conv(prefix + ".key_conv", attention_[a].key_conv);
    conv(prefix + ".value_conv", attention_[a].value_conv);
    out.push_back({prefix + ".query_proj", attention_[a].query_proj});
    out.push_back({prefix + ".key_proj", attention_[a].key_proj});
  }
  for (std::size_t u = 0; u < upsamplers_.size(); ++u)
    conv("upsample" + std::to_string(u), upsamplers_[u].conv);
  conv("reorg", reorg_);
  const char* names[4] = {"head.voice_real", "head.voice_imag", "head.acc_real", "head.acc_imag"};
  for (int i = 0; i < 4; ++i) conv(names[i], heads_[i]);
  return out;
}

template <typename T>
std::vector<ag::Tensor<T>> SADenseUNet<T>::parameter_tensors() const {
  std::vector<ag::Tensor<T>> out;
  for (auto& p : parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::size_t SADenseUNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
std::vector<ConvLayer<T>*> SADenseUNet<T>::head_layers() {
  return {&heads_[0], &heads_[1], &heads_[2], &heads_[3]};
}

// ---------------------------------------------------------------------------
// Tensor/spectrogram glue and losses

template <typename T>
ag::Tensor<T> spectrogram_tensor(const ComplexSpectrogram& spec) {
  const std::size_t cells = spec.real.size();
  std::vector<T> v(2 * cells);
  for (std::size_t i = 0; i < cells; ++i) {
    v[i] = static_cast<T>(spec.real.data[i]);
    v[cells + i] = static_cast<T>(spec.imag.data[i]);
  }
  return ag::Tensor<T>::from({2, spec.bins(), spec.frames()}, std::move(v));
}

template <typename T>
Grid to_grid(const ag::Tensor<T>& t) {
  const auto& s = t.shape();
  std::size_t rows, cols;
  if (s.size() == 3 && s[0] == 1) {
    rows = s[1];
    cols = s[2];
  } else if (s.size() == 2) {
    rows = s[0];
    cols = s[1];
  } else {
    throw std::invalid_argument("to_grid: expected [1, F, T] or [F, T], got " + ag::to_string(s));
  }
  Grid g(rows, cols);
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = static_cast<float>(t.values()[i]);
  return g;
}

namespace {

template <typename T>
ag::Tensor<T> grid_tensor(const Grid& g) {
  std::vector<T> v(g.data.begin(), g.data.end());
  return ag::Tensor<T>::from({1, g.rows, g.cols}, std::move(v));
}

template <typename T>
void check_heads(const HeadOutputs<T>& h, const Grid& ref, const char* op) {
  if (h.voice_real.dim(1) != ref.rows || h.voice_real.dim(2) != ref.cols)
    throw std::invalid_argument(std::string(op) + ": head shape " +
                                ag::to_string(h.voice_real.shape()) + " vs spectrogram " +
                                std::to_string(ref.rows) + "x" + std::to_string(ref.cols));
}

// sum |Re(S - M*Y)| + |Im(S - M*Y)|
template <typename T>
ag::Tensor<T> masked_l1(const ag::Tensor<T>& mr, const ag::Tensor<T>& mi, const ag::Tensor<T>& yr,
                        const ag::Tensor<T>& yi, const ComplexSpectrogram& s) {
  const auto est_r = ag::sub(ag::mul(mr, yr), ag::mul(mi, yi));
  const auto est_i = ag::add(ag::mul(mr, yi), ag::mul(mi, yr));
  return ag::add(ag::sum(ag::abs(ag::sub(grid_tensor<T>(s.real), est_r))),
                 ag::sum(ag::abs(ag::sub(grid_tensor<T>(s.imag), est_i))));
}

}  // namespace

template <typename T>
ag::Tensor<T> cirm_cs_loss(const HeadOutputs<T>& h, const ComplexSpectrogram& mixture,
                           const ComplexSpectrogram& voice, const ComplexSpectrogram& acc) {
  check_heads(h, mixture.real, "cirm_cs_loss");
  if (!voice.same_shape(mixture) || !acc.same_shape(mixture))
    throw std::invalid_argument("cirm_cs_loss: spectrogram shapes differ");
  const auto yr = grid_tensor<T>(mixture.real);
  const auto yi = grid_tensor<T>(mixture.imag);
  const auto total = ag::add(masked_l1(h.voice_real, h.voice_imag, yr, yi, voice),
                             masked_l1(h.acc_real, h.acc_imag, yr, yi, acc));
  return ag::scale(total, static_cast<T>(1.0 / static_cast<double>(mixture.real.size())));
}

template <typename T>
ag::Tensor<T> tcs_loss(const HeadOutputs<T>& h, const ComplexSpectrogram& voice,
                       const ComplexSpectrogram& acc) {
  check_heads(h, voice.real, "tcs_loss");
  const T s = h.input_scale;
  auto l1 = [&](const ag::Tensor<T>& head, const Grid& target) {
    return ag::sum(ag::abs(ag::sub(grid_tensor<T>(target), ag::scale(head, s))));
  };
  const auto total = ag::add(ag::add(l1(h.voice_real, voice.real), l1(h.voice_imag, voice.imag)),
                             ag::add(l1(h.acc_real, acc.real), l1(h.acc_imag, acc.imag)));
  return ag::scale(total, static_cast<T>(1.0 / static_cast<double>(voice.real.size())));
}

template <typename T>
ag::Tensor<T> tms_loss(const HeadOutputs<T>& h, const ComplexSpectrogram& voice,
                       const ComplexSpectrogram& acc) {
  check_heads(h, voice.real, "tms_loss");
  const T s = h.input_scale;
  auto l1 = [&](const ag::Tensor<T>& head, const Grid& target) {
    return ag::sum(ag::abs(ag::sub(grid_tensor<T>(target), ag::scale(head, s))));
  };
  const auto total =
      ag::add(l1(h.voice_real, dsp::magnitude(voice)), l1(h.acc_real, dsp::magnitude(acc)));
  return ag::scale(total, static_cast<T>(1.0 / static_cast<double>(voice.real.size())));
}

#define CMSEP_INSTANTIATE_MODEL(T)                                                              \
  template struct DenseBlock<T>;                                                                \
  template struct AttentionModule<T>;                                                           \
  template struct Upsample<T>;                                                                  \
  template class SADenseUNet<T>;                                                                \
  template ag::Tensor<T> spectrogram_tensor<T>(const ComplexSpectrogram&);                      \
  template Grid to_grid<T>(const ag::Tensor<T>&);                                               \
  template ag::Tensor<T> cirm_cs_loss<T>(const HeadOutputs<T>&, const ComplexSpectrogram&,      \
                                         const ComplexSpectrogram&, const ComplexSpectrogram&); \
  template ag::Tensor<T> tcs_loss<T>(const HeadOutputs<T>&, const ComplexSpectrogram&,          \
                                     const ComplexSpectrogram&);                                \
  template ag::Tensor<T> tms_loss<T>(const HeadOutputs<T>&, const ComplexSpectrogram&,          \
                                     const ComplexSpectrogram&);

CMSEP_INSTANTIATE_MODEL(float)
CMSEP_INSTANTIATE_MODEL(double)

#undef CMSEP_INSTANTIATE_MODEL

}  // namespace cmsep::model
