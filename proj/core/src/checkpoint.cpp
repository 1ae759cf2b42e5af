#include "delaymatch/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace delaymatch {

namespace {

constexpr char magic[4] = {'D', 'M', 'N', 'N'};
constexpr std::uint32_t version = 1;
constexpr std::uint32_t max_string = 1u << 16;
constexpr std::uint64_t max_dim = 1u << 24;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) fail("truncated file");
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > max_string) fail("string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail("truncated file");
    return s;
  }

  void get_doubles(double* dst, std::size_t n) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) fail("truncated weights");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("checkpoint " + path_.string() + ": " + what);
  }

 private:
  std::ifstream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

const NamedNetwork& Checkpoint::network(const std::string& name) const {
  for (const auto& n : networks)
    if (n.name == name) return n;
  throw std::runtime_error("checkpoint has no network named '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(magic, 4);
  put<std::uint32_t>(out, version);
  put_string(out, ckpt.model);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.networks.size()));
  for (const auto& net : ckpt.networks) {
    put_string(out, net.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.spec.head));
    const auto dims = net.spec.layer_dims();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size() - 1));
    for (auto d : dims) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (std::size_t l = 0; l < net.params.weights.size(); ++l) {
      const auto& w = net.params.weights[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) put<double>(out, w(r, c));
      const auto& b = net.params.biases[l];
      out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
    }
  }
  if (!out) throw std::runtime_error("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Eigen::Index> expected_input_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader rd(in, path);
  char head[4];
  in.read(head, 4);
  if (!in || std::memcmp(head, magic, 4) != 0) rd.fail("bad magic");
  const auto ver = rd.get<std::uint32_t>();
  if (ver != version) rd.fail("unsupported version " + std::to_string(ver));

  Checkpoint ckpt;
  ckpt.model = rd.get_string();
  const auto count = rd.get<std::uint32_t>();
  if (count > 16) rd.fail("network count out of range");
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedNetwork net;
    net.name = rd.get_string();
    const auto head_kind = rd.get<std::uint32_t>();
    if (head_kind > 1) rd.fail("unknown output head");
    net.spec.head = static_cast<OutputHead>(head_kind);
    const auto layers = rd.get<std::uint32_t>();
    if (layers < 1 || layers > 64) rd.fail("layer count out of range");
    std::vector<Eigen::Index> dims(layers + 1);
    for (auto& d : dims) {
      const auto v = rd.get<std::uint64_t>();
      if (v < 1 || v > max_dim) rd.fail("layer width out of range");
      d = static_cast<Eigen::Index>(v);
    }
    net.spec.input_dim = dims.front();
    net.spec.output_dim = dims.back();
    net.spec.hidden.assign(dims.begin() + 1, dims.end() - 1);
    if (expected_input_dim && net.spec.input_dim != *expected_input_dim) {
      rd.fail("network '" + net.name + "' has input_dim " + std::to_string(net.spec.input_dim) +
              " but the environment needs input_dim " + std::to_string(*expected_input_dim));
    }
    net.params = MlpParams::zeros_like(net.spec);
    for (std::size_t l = 0; l < net.params.weights.size(); ++l) {
      auto& w = net.params.weights[l];
      std::vector<double> buf(static_cast<std::size_t>(w.size()));
      rd.get_doubles(buf.data(), buf.size());
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = buf[static_cast<std::size_t>(r * w.cols() + c)];
      rd.get_doubles(net.params.biases[l].data(), static_cast<std::size_t>(net.params.biases[l].size()));
    }
    if (!net.params.all_finite()) rd.fail("non-finite weights");
    ckpt.networks.push_back(std::move(net));
  }
  if (in.peek() != std::char_traits<char>::eof()) rd.fail("trailing bytes");
  return ckpt;
}

}  // namespace delaymatch
