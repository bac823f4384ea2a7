#include <cstring>
#include <fstream>
#include <iterator>

#include "samif/errors.hpp"
#include "samif/samtrain.hpp"

namespace samif {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'M', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint64_t kHeaderBytes = 4 + 2 + 8 * 3 + 32;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>) {
      std::memcpy(&bits, &value, sizeof value);
    } else {
      bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
      double v;
      std::memcpy(&v, &bits, sizeof v);
      return v;
    } else {
      return static_cast<T>(bits);
    }
  }
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("trajectory file is truncated");
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t trajectory_file_size(const Trajectory& traj) {
  std::uint64_t size = kHeaderBytes;
  for (const Checkpoint& c : traj.checkpoints) {
    size += 8 + 8 + 8 + 4 + 4 * c.batch.size() + 8 * c.params.size();
  }
  return size;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, 4);
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint64_t>(traj.header.param_count);
  w.put<std::uint64_t>(traj.header.rows);
  w.put<std::uint64_t>(traj.header.steps);
  w.bytes(traj.header.config_digest.data(), traj.header.config_digest.size());
  for (const Checkpoint& c : traj.checkpoints) {
    if (c.params.size() != traj.header.param_count) {
      throw InvalidInput("checkpoint at step " + std::to_string(c.step) +
                         " disagrees with the header parameter count");
    }
    w.put<std::uint64_t>(c.step);
    w.put<double>(c.eta);
    w.put<double>(c.weight);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.batch.size()));
    for (std::uint32_t i : c.batch) w.put<std::uint32_t>(i);
    for (double v : c.params) w.put<double>(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + ": bad magic, not a trajectory file");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported trajectory version " + std::to_string(version));
  }
  Trajectory traj;
  traj.header.param_count = r.get<std::uint64_t>();
  traj.header.rows = r.get<std::uint64_t>();
  traj.header.steps = r.get<std::uint64_t>();
  r.bytes(traj.header.config_digest.data(), traj.header.config_digest.size());

  while (!r.done()) {
    Checkpoint c;
    c.step = r.get<std::uint64_t>();
    c.eta = r.get<double>();
    c.weight = r.get<double>();
    const auto count = r.get<std::uint32_t>();
    c.batch.resize(count);
    for (auto& i : c.batch) {
      i = r.get<std::uint32_t>();
      if (i >= traj.header.rows) throw FormatError("batch index out of range in checkpoint " + std::to_string(c.step));
    }
    ParamVector params(traj.header.param_count);
    for (double& v : params) v = r.get<double>();
    c.params = std::move(params);
    if (!traj.checkpoints.empty() && c.step <= traj.checkpoints.back().step) {
      throw FormatError("checkpoint steps are not strictly increasing");
    }
    traj.checkpoints.push_back(std::move(c));
  }
  if (traj.checkpoints.empty() || traj.checkpoints.front().step != 0) {
    throw FormatError(path.string() + ": trajectory must start with the step-0 checkpoint");
  }
  return traj;
}

}  // namespace samif
