#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "mulopt/env.hpp"
#include "mulopt/nn.hpp"
#include "mulopt/run.hpp"

namespace mulopt {

// ---- action selection -------------------------------------------------------

// Epsilon-greedy over masked-in actions; greedy ties go to the lowest index.
inline int select_dqn(const Vec& q, const ActionMask& mask, double eps, std::mt19937_64& rng) {
  if (static_cast<std::size_t>(q.size()) != mask.size()) throw ShapeMismatch("Q vector and mask differ in length");
  if (mask.count() == 0) throw NoLegalAction("no action is legal in this state");
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps) return uniform_masked(mask, rng);
  int best = -1;
  for (int i = 0; i < q.size(); ++i)
    if (mask[i] && (best < 0 || q[i] > q[best])) best = i;
  return best;
}

// Softmax restricted to masked-in entries; masked-out probabilities are 0.
inline Vec masked_softmax(const Vec& logits, const ActionMask& mask) {
  if (static_cast<std::size_t>(logits.size()) != mask.size()) throw ShapeMismatch("logits and mask differ in length");
  if (mask.count() == 0) throw NoLegalAction("no action is legal in this state");
  double top = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < logits.size(); ++i)
    if (mask[i]) top = std::max(top, logits[i]);
  Vec p = Vec::Zero(logits.size());
  double z = 0.0;
  for (int i = 0; i < logits.size(); ++i)
    if (mask[i]) z += p[i] = std::exp(logits[i] - top);
  return p / z;
}

inline int select_a2c(const Vec& logits, const ActionMask& mask, std::mt19937_64& rng) {
  const Vec p = masked_softmax(logits, mask);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < p.size(); ++i) {
    if (!mask[i]) continue;
    last = i;
    acc += p[i];
    if (u < acc) return i;
  }
  return last;  // rounding left u above the final partial sum
}

// ---- replay -----------------------------------------------------------------

struct Transition {
  StagedTree s;
  int a = 0;
  double r = 0.0;
  StagedTree next;
  ActionMask mask_next;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidArgument("replay capacity must be positive");
  }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  // Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t batch, std::mt19937_64& rng) const {
    if (batch == 0 || items_.size() < batch) throw InvalidArgument("not enough transitions to sample a batch");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t k = 0; k < batch; ++k) out.push_back(&items_[pick(rng)]);
    return out;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t head() const { return head_; }
  const std::vector<Transition>& items() const { return items_; }

  void restore(std::vector<Transition> items, std::size_t head) {
    if (items.size() > capacity_ || head >= capacity_) throw IoError("replay state exceeds capacity");
    items_ = std::move(items);
    head_ = head;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;
};

// ---- DQN --------------------------------------------------------------------

struct DqnConfig {
  double gamma = 0.8;
  double eps_start = 0.95;
  double eps_end = 0.05;
  std::uint64_t total_steps = 2000;
  std::uint64_t warmup = 200;
  int batch = 64;
  std::size_t capacity = 10000;
  double lr = 2e-4;
  std::uint64_t seed = 1;
  int episode_len = 30;
  bool reset_to_best = false;
  int target_sync = 0;  // copy weights to a target network every n updates; 0 = off
  NetArch arch;         // columns are taken from the environment

  void validate() const {
    if (!(0.0 <= eps_end && eps_end <= eps_start && eps_start <= 1.0))
      throw InvalidArgument("need 0 <= eps_end <= eps_start <= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in (0, 1)");
    if (batch < 1) throw InvalidArgument("batch must be positive");
    if (capacity < static_cast<std::size_t>(batch)) throw InvalidArgument("replay capacity must hold a batch");
    if (episode_len < 1) throw InvalidArgument("episode_len must be positive");
    if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
    if (target_sync < 0) throw InvalidArgument("target_sync must be non-negative");
    arch.validate();
  }
};

// y = r + gamma * max over masked-in a' of Q(s', a'); y = r when s' is a dead end.
inline Vec dqn_targets(const Net& net, const std::vector<const Transition*>& batch, double gamma) {
  const int st = net.arch().st_max;
  Mat next(net.arch().input_size(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) next.col(static_cast<Eigen::Index>(b)) = encode_state(batch[b]->next, st);
  const Mat q = gamma == 0.0 ? Mat() : net.forward(next).out;
  Vec y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& t = *batch[b];
    double best = -std::numeric_limits<double>::infinity();
    if (gamma != 0.0)
      for (int i = 0; i < q.rows(); ++i)
        if (t.mask_next[i]) best = std::max(best, q(i, static_cast<Eigen::Index>(b)));
    y[static_cast<Eigen::Index>(b)] = t.r + (std::isfinite(best) ? gamma * best : 0.0);
  }
  return y;
}

// Gradient of mean((y - Q(s, a))^2) over the batch.
inline Vec dqn_gradient(const Net& net, const std::vector<const Transition*>& batch, const Vec& y) {
  const int st = net.arch().st_max;
  const auto n = static_cast<Eigen::Index>(batch.size());
  Mat s(net.arch().input_size(), n);
  for (Eigen::Index b = 0; b < n; ++b) s.col(b) = encode_state(batch[b]->s, st);
  const auto tape = net.forward(s);
  Mat dout = Mat::Zero(tape.out.rows(), n);
  for (Eigen::Index b = 0; b < n; ++b) dout(batch[b]->a, b) = 2.0 * (tape.out(batch[b]->a, b) - y[b]) / n;
  return net.backward(tape, dout);
}

namespace detail {

inline NetArch arch_for(const Environment& env, NetArch arch, HeadKind head) {
  arch.columns = env.profile().num_columns();
  arch.head = head;
  if (env.stage_cap() && *env.stage_cap() > arch.st_max)
    throw InvalidArgument("stage cap " + std::to_string(*env.stage_cap()) + " exceeds the network's st_max " +
                          std::to_string(arch.st_max));
  return arch;
}

}  // namespace detail

class DqnAgent final : public Searcher {
 public:
  DqnAgent(const Environment& env, DqnConfig cfg)
      : env_(env),
        cfg_(std::move(cfg)),
        net_((cfg_.validate(), detail::arch_for(env, cfg_.arch, HeadKind::Q)), cfg_.seed),
        target_(net_),
        buffer_(cfg_.capacity),
        rng_(cfg_.seed ^ 0xd9e7a1c3b5f20486ULL),
        initial_(env.reset()) {
    opt_.lr = cfg_.lr;
    state_ = initial_;
    mask_ = env_.mask(state_);
    tracker_.start(initial_);
  }

  bool done() const override { return steps_ >= cfg_.total_steps || stuck_; }
  std::uint64_t steps_done() const override { return steps_; }
  const Tracker& tracker() const override { return tracker_; }
  const Net& net() const { return net_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  double epsilon() const {
    const double frac = cfg_.total_steps == 0 ? 1.0 : std::min(1.0, double(steps_) / double(cfg_.total_steps));
    return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
  }

  void step() override {
    if (done()) return;
    if (mask_.count() == 0) {
      restart();
      if (mask_.count() == 0) {
        stuck_ = true;
        return;
      }
    }
    int a;
    if (steps_ < cfg_.warmup) {
      a = uniform_masked(mask_, rng_);
    } else {
      a = select_dqn(net_.forward_q(encode_state(state_.tree, net_.arch().st_max)), mask_, epsilon(), rng_);
    }
    auto next = env_.apply(state_, Action::from_flat(a));
    auto next_mask = env_.mask(next);
    buffer_.push({state_.tree, a, reward(state_.cost.scalar_cost, next.cost.scalar_cost), next.tree, next_mask});
    tracker_.observe(next, 0);
    if (steps_ >= cfg_.warmup && buffer_.size() >= static_cast<std::size_t>(cfg_.batch)) train();
    state_ = std::move(next);
    mask_ = std::move(next_mask);
    ++steps_;
    if (++episode_step_ >= cfg_.episode_len) restart();
  }

  nlohmann::json save_state() const override {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& t : buffer_.items())
      items.push_back({counts_to_json(t.s.column_sums()), t.a, t.r, counts_to_json(t.next.column_sums())});
    return {{"algo", "dqn"},       {"steps", steps_},
            {"episode_step", episode_step_}, {"updates", updates_},
            {"rng", rng_state(rng_)},        {"state", counts_to_json(state_.counts)},
            {"state_step", state_.step},     {"tracker", tracker_.save()},
            {"replay", items},               {"replay_head", buffer_.head()},
            {"target", cfg_.target_sync > 0 ? std::vector<double>(target_.params().data(),
                                                                  target_.params().data() + target_.params().size())
                                             : std::vector<double>{}}};
  }

  void load_state(const nlohmann::json& j) override {
    if (j.at("algo") != "dqn") throw IoError("checkpoint belongs to a different algorithm");
    steps_ = j.at("steps").get<std::uint64_t>();
    episode_step_ = j.at("episode_step").get<int>();
    updates_ = j.at("updates").get<std::uint64_t>();
    load_rng_state(rng_, j.at("rng").get<std::string>());
    state_ = env_.make_state(counts_from_json(j.at("state")), j.at("state_step").get<int>());
    mask_ = env_.mask(state_);
    tracker_.load(j.at("tracker"), env_);
    std::vector<Transition> items;
    for (const auto& t : j.at("replay")) {
      auto next = assign(env_.profile(), counts_from_json(t[3]));
      auto m = compute_mask(env_.profile(), next.column_sums(), env_.stage_cap());
      items.push_back({assign(env_.profile(), counts_from_json(t[0])), t[1].get<int>(), t[2].get<double>(),
                       std::move(next), std::move(m)});
    }
    buffer_.restore(std::move(items), j.at("replay_head").get<std::size_t>());
    const auto target = j.at("target").get<std::vector<double>>();
    if (target.size() == static_cast<std::size_t>(target_.param_count()))
      target_.params() = Eigen::Map<const Vec>(target.data(), static_cast<Eigen::Index>(target.size()));
  }

  std::optional<std::string> network_bytes() const override { return checkpoint_bytes(net_, opt_); }
  void load_network(const std::string& bytes) override {
    auto ck = checkpoint_from_bytes(bytes);
    if (!(ck.net.arch() == net_.arch())) throw IoError("checkpoint architecture does not match the configuration");
    net_ = std::move(ck.net);
    opt_ = std::move(ck.opt);
  }

 private:
  void restart() {
    state_ = cfg_.reset_to_best ? tracker_.best_state() : initial_;
    mask_ = env_.mask(state_);
    episode_step_ = 0;
  }

  void train() {
    const auto batch = buffer_.sample(static_cast<std::size_t>(cfg_.batch), rng_);
    const Net& bootstrap = cfg_.target_sync > 0 ? target_ : net_;
    const Vec y = dqn_targets(bootstrap, batch, cfg_.gamma);
    opt_.step(net_.params(), dqn_gradient(net_, batch, y));
    ++updates_;
    if (cfg_.target_sync > 0 && updates_ % static_cast<std::uint64_t>(cfg_.target_sync) == 0) target_.params() = net_.params();
  }

  const Environment& env_;
  DqnConfig cfg_;
  Net net_;
  Net target_;
  RmsProp opt_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  EnvState initial_;
  EnvState state_;
  ActionMask mask_;
  Tracker tracker_;
  std::uint64_t steps_ = 0, updates_ = 0;
  int episode_step_ = 0;
  bool stuck_ = false;
};

inline RunResult dqn_train(const Environment& env, const DqnConfig& cfg) { return DqnAgent(env, cfg).run(); }

// ---- A2C --------------------------------------------------------------------

struct A2cConfig {
  int n_threads = 4;
  int n_step = 5;
  int t_up = 0;  // synchronized steps between updates; 0 means n_step
  double gamma = 0.8;
  double lr = 2e-4;
  double entropy_coef = 0.0;
  std::uint64_t total_steps = 2000;  // environment steps summed over threads
  std::uint64_t seed = 1;
  int episode_len = 30;
  bool reset_to_best = false;
  NetArch arch;

  int update_interval() const { return t_up > 0 ? t_up : n_step; }

  void validate() const {
    if (n_threads < 1) throw InvalidArgument("n_threads must be at least 1");
    if (n_step < 1) throw InvalidArgument("n_step must be at least 1");
    if (t_up < 0) throw InvalidArgument("t_up must be non-negative");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in (0, 1)");
    if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
    if (entropy_coef < 0.0) throw InvalidArgument("entropy_coef must be non-negative");
    if (episode_len < 1) throw InvalidArgument("episode_len must be positive");
    arch.validate();
  }
};

// One recorded step of one worker.
struct A2cStep {
  Vec s;
  int a = 0;
  double r = 0.0;
  ActionMask mask;   // mask at s
  double v = 0.0;    // value of s when acting
  Vec next;          // encoding of the state reached
  bool cut = false;  // the episode was reset after this step
};

struct A2cUpdateInfo {
  const Vec& params_before;
  const Vec& params_after;
  const std::vector<std::vector<A2cStep>>& segments;  // per worker
};

struct A2cHooks {
  std::function<void(const A2cUpdateInfo&)> on_update;
};

// Bootstrapped returns: each step sums up to n_step rewards, stopping at an
// episode cut or the end of the segment, then adds the discounted value of
// the state reached there. `boot[i]` is the value of step i's next state.
inline std::vector<double> nstep_returns(const std::vector<A2cStep>& seg, const std::vector<double>& boot,
                                         int n_step, double gamma) {
  const int len = static_cast<int>(seg.size());
  std::vector<double> out(len);
  for (int i = 0; i < len; ++i) {
    double ret = 0.0, disc = 1.0;
    for (int k = i;; ++k) {
      ret += disc * seg[k].r;
      disc *= gamma;
      if (k - i + 1 == n_step || k == len - 1 || seg[k].cut) {
        ret += disc * boot[k];
        break;
      }
    }
    out[i] = ret;
  }
  return out;
}

// Mean over the segment of the gradient of
//   -log pi(a|s) * A  -  entropy_coef * H(pi(.|s))  +  1/2 (v(s) - R)^2
// with A = R - v(s) held constant.
inline Vec a2c_gradient(const Net& net, const std::vector<A2cStep>& seg, const std::vector<double>& returns,
                        double entropy_coef) {
  const auto n = static_cast<Eigen::Index>(seg.size());
  const int actions = net.arch().actions();
  Mat x(net.arch().input_size(), n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = seg[i].s;
  const auto tape = net.forward(x);
  Mat dout = Mat::Zero(tape.out.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& st = seg[i];
    const Vec p = masked_softmax(tape.out.col(i).head(actions), st.mask);
    const double adv = returns[i] - st.v;
    double entropy = 0.0;
    for (int k = 0; k < actions; ++k)
      if (p[k] > 0.0) entropy -= p[k] * std::log(p[k]);
    for (int k = 0; k < actions; ++k) {
      if (!st.mask[k]) continue;
      double d = -adv * ((k == st.a ? 1.0 : 0.0) - p[k]);
      if (entropy_coef > 0.0 && p[k] > 0.0) d += entropy_coef * p[k] * (std::log(p[k]) + entropy);
      dout(k, i) = d / n;
    }
    dout(actions, i) = (tape.out(actions, i) - returns[i]) / n;
  }
  return net.backward(tape, dout);
}

class A2cAgent final : public Searcher {
 public:
  A2cAgent(const Environment& env, A2cConfig cfg, A2cHooks hooks = {})
      : env_(env),
        cfg_(std::move(cfg)),
        hooks_(std::move(hooks)),
        net_((cfg_.validate(), detail::arch_for(env, cfg_.arch, HeadKind::ActorCritic)), cfg_.seed),
        initial_(env.reset()) {
    opt_.lr = cfg_.lr;
    tracker_.start(initial_);
    for (int w = 0; w < cfg_.n_threads; ++w) {
      std::seed_seq seq{cfg_.seed, static_cast<std::uint64_t>(w), std::uint64_t{0xa2c}};
      workers_.push_back({initial_, env_.mask(initial_), std::mt19937_64(seq), 0, {}});
    }
  }

  bool done() const override { return steps_ >= cfg_.total_steps || stuck_; }
  std::uint64_t steps_done() const override { return steps_; }
  const Tracker& tracker() const override { return tracker_; }
  const Net& net() const { return net_; }

  // Runs one segment of update_interval() synchronized steps, then updates.
  void step() override {
    if (done()) return;
    for (auto& w : workers_) w.segment.clear();
    for (int round = 0; round < cfg_.update_interval() && !done(); ++round) {
      const int active = static_cast<int>(std::min<std::uint64_t>(cfg_.n_threads, cfg_.total_steps - steps_));
      std::vector<std::optional<EnvState>> reached(active);
      parallel(active, [&](int w) { reached[w] = act(workers_[w]); });
      bool any = false;
      for (int w = 0; w < active; ++w)
        if (reached[w]) {
          tracker_.observe(*reached[w], w);
          ++steps_;
          any = true;
        }
      if (!any) {
        stuck_ = true;
        break;
      }
    }
    update();
  }

  nlohmann::json save_state() const override {
    nlohmann::json workers = nlohmann::json::array();
    for (const auto& w : workers_)
      workers.push_back({{"state", counts_to_json(w.state.counts)}, {"state_step", w.state.step},
                         {"episode_step", w.episode_step}, {"rng", rng_state(w.rng)}});
    return {{"algo", "a2c"}, {"steps", steps_}, {"workers", workers}, {"tracker", tracker_.save()}};
  }

  void load_state(const nlohmann::json& j) override {
    if (j.at("algo") != "a2c") throw IoError("checkpoint belongs to a different algorithm");
    if (j.at("workers").size() != workers_.size()) throw IoError("checkpoint thread count differs from the configuration");
    steps_ = j.at("steps").get<std::uint64_t>();
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      const auto& wj = j.at("workers")[i];
      auto& w = workers_[i];
      w.state = env_.make_state(counts_from_json(wj.at("state")), wj.at("state_step").get<int>());
      w.mask = env_.mask(w.state);
      w.episode_step = wj.at("episode_step").get<int>();
      load_rng_state(w.rng, wj.at("rng").get<std::string>());
    }
    tracker_.load(j.at("tracker"), env_);
  }

  std::optional<std::string> network_bytes() const override { return checkpoint_bytes(net_, opt_); }
  void load_network(const std::string& bytes) override {
    auto ck = checkpoint_from_bytes(bytes);
    if (!(ck.net.arch() == net_.arch())) throw IoError("checkpoint architecture does not match the configuration");
    net_ = std::move(ck.net);
    opt_ = std::move(ck.opt);
  }

 private:
  struct Worker {
    EnvState state;
    ActionMask mask;
    std::mt19937_64 rng;
    int episode_step = 0;
    std::vector<A2cStep> segment;
  };

  template <class F>
  static void parallel(int n, F&& f) {
    if (n == 1) {
      f(0);
      return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n);
    for (int w = 0; w < n; ++w)
      threads.emplace_back([&, w] {
        try {
          f(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Reads the shared parameters only.
  std::optional<EnvState> act(Worker& w) {
    if (w.mask.count() == 0) {
      restart(w);
      if (w.mask.count() == 0) return std::nullopt;
    }
    const int st = net_.arch().st_max;
    Vec s = encode_state(w.state.tree, st);
    const auto out = net_.forward_ac(s);
    const int a = select_a2c(out.logits, w.mask, w.rng);
    auto next = env_.apply(w.state, Action::from_flat(a));
    A2cStep rec{std::move(s), a, reward(w.state.cost.scalar_cost, next.cost.scalar_cost), w.mask, out.value,
                encode_state(next.tree, st), false};
    w.state = next;
    w.mask = env_.mask(w.state);
    if (++w.episode_step >= cfg_.episode_len) {
      rec.cut = true;
      restart(w);
    }
    w.segment.push_back(std::move(rec));
    return next;
  }

  void restart(Worker& w) {
    w.state = cfg_.reset_to_best ? tracker_.best_state() : initial_;
    w.mask = env_.mask(w.state);
    w.episode_step = 0;
  }

  void update() {
    const int n = static_cast<int>(workers_.size());
    std::vector<Vec> grads(n);
    parallel(n, [&](int w) {
      const auto& seg = workers_[w].segment;
      if (seg.empty()) return;
      std::vector<double> boot(seg.size());
      for (std::size_t i = 0; i < seg.size(); ++i)
        boot[i] = (!seg[i].cut && i + 1 < seg.size()) ? seg[i + 1].v : net_.forward_ac(seg[i].next).value;
      grads[w] = a2c_gradient(net_, seg, nstep_returns(seg, boot, cfg_.n_step, cfg_.gamma), cfg_.entropy_coef);
    });
    Vec g = Vec::Zero(net_.param_count());
    int contributing = 0;
    for (const auto& gw : grads)
      if (gw.size()) {
        g += gw;
        ++contributing;
      }
    if (contributing == 0) return;
    g /= contributing;
    if (hooks_.on_update) {
      const Vec before = net_.params();
      opt_.step(net_.params(), g);
      std::vector<std::vector<A2cStep>> segments;
      for (const auto& w : workers_) segments.push_back(w.segment);
      hooks_.on_update({before, net_.params(), segments});
    } else {
      opt_.step(net_.params(), g);
    }
  }

  const Environment& env_;
  A2cConfig cfg_;
  A2cHooks hooks_;
  Net net_;
  RmsProp opt_;
  EnvState initial_;
  std::vector<Worker> workers_;
  Tracker tracker_;
  std::uint64_t steps_ = 0;
  bool stuck_ = false;
};

inline RunResult a2c_train(const Environment& env, const A2cConfig& cfg, A2cHooks hooks = {}) {
  return A2cAgent(env, cfg, std::move(hooks)).run();
}

}  // namespace mulopt
