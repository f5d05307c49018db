#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include "gsmrl/agent/trainer.hpp"

namespace gsmrl {

/// Contents of a checkpoint file: trainer configuration, network, optimizer state and the
/// curve so far. Randomness is keyed by (seed, iteration), so these fully determine a resume.
struct Checkpoint {
  nlohmann::json config;  // includes the run's config hash when written by the CLI
  EncodingLayout layout;
  NetworkShape shape;
  Eigen::VectorXd params;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  std::uint64_t adam_steps = 0;
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::string terminal_source = "surrogate";
  std::vector<CurvePoint> curve;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'G', 'S', 'M', 'R', 'L', 'C', 'K', '1'};

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (double x : v) f64(x);
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}
  std::uint64_t u64() {
    unsigned char b[8];
    if (!in_.read(reinterpret_cast<char*>(b), 8)) throw Error("truncated checkpoint");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return v;
  }
  double f64() {
    const auto bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const auto n = u64();
    if (n > (1u << 30)) throw Error("corrupt checkpoint");
    std::string s(n, '\0');
    if (!in_.read(s.data(), static_cast<std::streamsize>(n))) throw Error("truncated checkpoint");
    return s;
  }
  Eigen::VectorXd vec() {
    const auto n = u64();
    if (n > (1u << 28)) throw Error("corrupt checkpoint");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = f64();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(detail::kCheckpointMagic, 8);
  detail::BinaryWriter w(out);
  w.str(ck.config.dump());
  w.str(to_string(ck.layout.task));
  w.u64(ck.layout.d);
  w.u64(ck.layout.prediction_slots);
  w.u64(ck.layout.side_info ? 1 : 0);
  w.u64(ck.shape.inputs);
  w.u64(ck.shape.actions);
  w.u64(ck.shape.predictions);
  w.u64(ck.shape.hidden.size());
  for (auto h : ck.shape.hidden) w.u64(h);
  w.vec(ck.params);
  w.vec(ck.adam_m);
  w.vec(ck.adam_v);
  w.u64(ck.adam_steps);
  w.u64(ck.iteration);
  w.u64(ck.seed);
  w.str(ck.terminal_source);
  w.u64(ck.curve.size());
  for (const auto& p : ck.curve) {
    w.u64(p.iteration);
    for (double v : {p.mean_return, p.raw_return, p.moving_return, p.accuracy, p.mean_count, p.losses.policy,
                     p.losses.value, p.losses.prediction, p.losses.entropy, p.losses.total, p.losses.clip_fraction})
      w.f64(v);
  }
  if (!out) throw Error("failed to write checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) throw Error("not a checkpoint file");
  detail::BinaryReader r(in);
  Checkpoint ck;
  ck.config = nlohmann::json::parse(r.str());
  ck.layout.task = parse_task(r.str());
  ck.layout.d = r.u64();
  ck.layout.prediction_slots = r.u64();
  ck.layout.side_info = r.u64() != 0;
  ck.shape.inputs = r.u64();
  ck.shape.actions = r.u64();
  ck.shape.predictions = r.u64();
  ck.shape.hidden.resize(r.u64());
  for (auto& h : ck.shape.hidden) h = r.u64();
  ck.params = r.vec();
  ck.adam_m = r.vec();
  ck.adam_v = r.vec();
  ck.adam_steps = r.u64();
  ck.iteration = r.u64();
  ck.seed = r.u64();
  ck.terminal_source = r.str();
  ck.curve.resize(r.u64());
  for (auto& p : ck.curve) {
    p.iteration = r.u64();
    for (double* v : {&p.mean_return, &p.raw_return, &p.moving_return, &p.accuracy, &p.mean_count, &p.losses.policy,
                      &p.losses.value, &p.losses.prediction, &p.losses.entropy, &p.losses.total, &p.losses.clip_fraction})
      *v = r.f64();
  }
  if (ck.params.size() != Network(ck.shape).num_params()) throw Error("checkpoint parameter count mismatch");
  return ck;
}

inline Checkpoint make_checkpoint(const Trainer& trainer, nlohmann::json config, TerminalSource source) {
  Checkpoint ck;
  ck.config = std::move(config);
  ck.layout = trainer.agent().layout();
  ck.shape = trainer.agent().network().shape();
  ck.params = trainer.agent().network().params();
  ck.adam_m = trainer.optimizer().first_moment();
  ck.adam_v = trainer.optimizer().second_moment();
  ck.adam_steps = trainer.optimizer().steps();
  ck.iteration = trainer.iteration();
  ck.seed = trainer.config().seed;
  ck.terminal_source = to_string(source);
  ck.curve = trainer.curve();
  return ck;
}

inline GsmrlAgent agent_from_checkpoint(const Checkpoint& ck) {
  Network net(ck.shape);
  net.params() = ck.params;
  return GsmrlAgent(ck.layout, std::move(net));
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace gsmrl
