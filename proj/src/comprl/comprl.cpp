#include "lcl/comprl/comprl.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>

#include "lcl/core/errors.hpp"

namespace lcl::comprl {
namespace {

constexpr std::size_t kHidden = 64;

void hash_doubles(std::uint64_t& h, const Vector& v) {
    for (double x : v) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    }
}

Vector softmax(const Vector& logits) {
    double hi = logits[0];
    for (double v : logits) hi = std::max(hi, v);
    Vector p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - hi);
    for (double& v : p) v /= sum;
    return p;
}

std::size_t sample_categorical(const Vector& probs, Rng& rng) {
    double u = rng.uniform();
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        if (u < probs[i]) return i;
        u -= probs[i];
    }
    return probs.size() - 1;
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

// Wrap one observation's slices as 1-row matrices for the batched chain.
std::vector<Matrix> single_batch(const std::vector<Vector>& slices) {
    std::vector<Matrix> out(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        out[i] = Matrix(1, slices[i].size());
        out[i].data = slices[i];
    }
    return out;
}

std::vector<Vector> obs_slices(const env::GridObs& obs) {
    env::GridSlices s = env::state_slices(obs);
    return {std::move(s.statics), std::move(s.target), std::move(s.agent)};
}

// The selection triple is truncated to the chain's depth so shallower custom
// chains (toy domains) route through the leading entries.
std::vector<std::size_t> to_vec(const ModuleSelection& sel, std::size_t levels) {
    return std::vector<std::size_t>(sel.begin(), sel.begin() + levels);
}

Vector chain_single(const ModularChainPolicy& chain, const ModuleSelection& sel,
                    const std::vector<Vector>& slices) {
    ModularChainPolicy::BatchCache cache;
    return chain.forward_batch(to_vec(sel, chain.banks.size()), single_batch(slices), &cache).data;
}

// Per-module Adam. Only the modules named by a selection step, so modules the
// current task never touches keep bit-identical parameters.
struct ModuleAdam {
    ModuleGrad m, v;
    std::size_t t = 0;
    explicit ModuleAdam(const ModuleNet& net) : m(net), v(net) {}
};

struct ChainAdam {
    std::vector<std::vector<ModuleAdam>> banks;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit ChainAdam(const ModularChainPolicy& chain) {
        banks.reserve(chain.banks.size());
        for (const auto& bank : chain.banks) {
            banks.emplace_back();
            banks.back().reserve(bank.size());
            for (const ModuleNet& mod : bank) banks.back().emplace_back(mod);
        }
    }

    void apply(double& p, double g, double& m, double& v, double alpha) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        p -= alpha * m / (std::sqrt(v) + eps);
    }

    void step(ModularChainPolicy& chain, const ModularTape& grad, const ModuleSelection& sel,
              double lr) {
        for (std::size_t lvl = 0; lvl < chain.banks.size(); ++lvl) {
            ModuleNet& mod = chain.banks[lvl][sel[lvl]];
            const ModuleGrad& g = grad.banks[lvl][sel[lvl]];
            ModuleAdam& st = banks[lvl][sel[lvl]];
            st.t += 1;
            const double alpha = lr * std::sqrt(1.0 - std::pow(beta2, double(st.t))) /
                                 (1.0 - std::pow(beta1, double(st.t)));
            for (std::size_t li = 0; li < mod.layers.size(); ++li) {
                DenseLayer& layer = mod.layers[li];
                const DenseGrad& lg = g.layers[li];
                ModuleGrad& m = st.m;
                ModuleGrad& v = st.v;
                for (std::size_t i = 0; i < layer.w.data.size(); ++i)
                    apply(layer.w.data[i], lg.dw.data[i], m.layers[li].dw.data[i],
                          v.layers[li].dw.data[i], alpha);
                for (std::size_t i = 0; i < layer.b.size(); ++i)
                    apply(layer.b[i], lg.db[i], m.layers[li].db[i], v.layers[li].db[i], alpha);
            }
        }
    }
};

// Gather replay rows into per-level slice batches.
std::vector<Matrix> gather(const TaskReplay& rep, const std::vector<std::size_t>& idx, bool next) {
    const std::vector<Vector>& first = next ? rep.data[idx[0]].next : rep.data[idx[0]].obs;
    std::vector<Matrix> out(first.size());
    for (std::size_t lvl = 0; lvl < first.size(); ++lvl)
        out[lvl] = Matrix(idx.size(), first[lvl].size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Transition& tr = rep.data[idx[r]];
        const std::vector<Vector>& slices = next ? tr.next : tr.obs;
        for (std::size_t lvl = 0; lvl < slices.size(); ++lvl)
            std::copy(slices[lvl].begin(), slices[lvl].end(),
                      out[lvl].data.begin() + r * slices[lvl].size());
    }
    return out;
}

// --- little-endian binary io -------------------------------------------------

void put_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    if (std::fwrite(b, 1, 4, f) != 4) throw ConfigError("replay file write failed");
}

void put_f64(std::FILE* f, double x) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(x);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    if (std::fwrite(b, 1, 8, f) != 8) throw ConfigError("replay file write failed");
}

std::uint32_t get_u32(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw ConfigError("replay file truncated");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

double get_f64(std::FILE* f) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) throw ConfigError("replay file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

void put_slices(std::FILE* f, const std::vector<Vector>& slices) {
    put_u32(f, static_cast<std::uint32_t>(slices.size()));
    for (const Vector& s : slices) {
        put_u32(f, static_cast<std::uint32_t>(s.size()));
        for (double x : s) put_f64(f, x);
    }
}

std::vector<Vector> get_slices(std::FILE* f) {
    std::vector<Vector> slices(get_u32(f));
    for (Vector& s : slices) {
        s.resize(get_u32(f));
        for (double& x : s) x = get_f64(f);
    }
    return slices;
}

struct FileCloser {
    std::FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

}  // namespace

std::uint64_t ModuleLibrary::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const ModularChainPolicy* chain : {&actor, &critic})
        for (const auto& bank : chain->banks)
            for (const ModuleNet& mod : bank)
                for (const DenseLayer& layer : mod.layers) {
                    hash_doubles(h, layer.w.data);
                    hash_doubles(h, layer.b);
                }
    return h;
}

ModuleLibrary ModuleLibrary::make(Rng& rng) {
    const std::size_t in1 = 5 * env::kObsCells;  // wall/floor/food/lava/door channels
    const std::size_t in2 = env::kObsCells + kHidden;
    return make_custom({in1, env::kObsCells, env::kObsCells},
                       {{in1, kHidden, kHidden},
                        {in2, kHidden, kHidden},
                        {in2, kHidden, kHidden, env::kNumActions}},
                       kModulesPerLevel, rng);
}

ModuleLibrary ModuleLibrary::make_custom(const std::vector<std::size_t>& slice_dims,
                                         const std::vector<std::vector<std::size_t>>& module_dims,
                                         std::size_t modules_per_level, Rng& rng) {
    if (slice_dims.empty() || slice_dims.size() != module_dims.size() || modules_per_level == 0)
        throw InvalidConfig("library needs matching slice/module dims and modules > 0");
    ModuleLibrary lib;
    for (ModularChainPolicy* chain : {&lib.actor, &lib.critic}) {
        chain->slice_dims = slice_dims;
        chain->banks.resize(module_dims.size());
        for (std::size_t lvl = 0; lvl < module_dims.size(); ++lvl) {
            const bool last = lvl + 1 == module_dims.size();
            for (std::size_t m = 0; m < modules_per_level; ++m)
                chain->banks[lvl].emplace_back(module_dims[lvl], Activation::Tanh, last, rng);
        }
    }
    return lib;
}

ModuleSelection given_selection(const env::GridTaskSpec& spec) {
    return {static_cast<std::size_t>(spec.object), static_cast<std::size_t>(spec.color - 1),
            static_cast<std::size_t>(spec.dynamics)};
}

ModuleSelection init_selection(std::size_t task_number) {
    if (task_number >= kModulesPerLevel)
        throw InvalidConfig("disjoint initialization covers only the first tasks");
    return {task_number, task_number, task_number};
}

void TaskReplay::push(Transition tr, Rng& rng) {
    if (capacity == 0) throw InvalidConfig("replay capacity must be positive");
    if (data.size() < capacity) {
        data.push_back(std::move(tr));
    } else {
        data[rng.uniform_index(capacity)] = std::move(tr);
    }
}

void save_replay(const std::string& path, const TaskReplay& replay) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ConfigError("cannot open replay file for writing: " + path);
    FileCloser closer{f};
    if (std::fwrite("LCLR", 1, 4, f) != 4) throw ConfigError("replay file write failed");
    put_u32(f, 1);  // version
    put_u32(f, static_cast<std::uint32_t>(replay.data.size()));
    for (const Transition& tr : replay.data) {
        put_slices(f, tr.obs);
        put_slices(f, tr.next);
        put_u32(f, static_cast<std::uint32_t>(tr.action));
        put_f64(f, tr.reward);
        const unsigned char done = tr.done ? 1 : 0;
        if (std::fwrite(&done, 1, 1, f) != 1) throw ConfigError("replay file write failed");
    }
}

TaskReplay load_replay(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("cannot open replay file: " + path);
    FileCloser closer{f};
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::string_view(magic, 4) != "LCLR")
        throw ConfigError("not a replay file: " + path);
    if (get_u32(f) != 1) throw ConfigError("unsupported replay file version");
    TaskReplay replay;
    replay.data.resize(get_u32(f));
    for (Transition& tr : replay.data) {
        tr.obs = get_slices(f);
        tr.next = get_slices(f);
        tr.action = static_cast<int>(get_u32(f));
        tr.reward = get_f64(f);
        unsigned char done = 0;
        if (std::fread(&done, 1, 1, f) != 1) throw ConfigError("replay file truncated");
        tr.done = done != 0;
    }
    replay.capacity = std::max(replay.capacity, replay.data.size());
    return replay;
}

namespace {

double rollout_return(const ModularChainPolicy& actor, const ModuleSelection& sel,
                      TaskEnv& env, Rng& rng) {
    env.reset(rng);
    double total = 0.0;
    while (!env.episode_done()) {
        const Vector logits = chain_single(actor, sel, obs_slices(env.observe()));
        const int action = static_cast<int>(sample_categorical(softmax(logits), rng));
        total += env.step(action).reward;
    }
    return total;
}

}  // namespace

ModuleSelection select_modules(const ModuleLibrary& lib, TaskEnv& env, SelectMode mode,
                               std::size_t rollouts_per_combo, Rng& rng) {
    if (!lib.initialized()) throw NotInitialized("module library is empty");
    if (rollouts_per_combo == 0) throw InvalidConfig("rollouts-per-combo must be positive");
    if (mode == SelectMode::Given) return given_selection(env.task());

    ModuleSelection best{0, 0, 0};
    double best_return = -std::numeric_limits<double>::infinity();
    const std::size_t per = lib.actor.banks.front().size();
    for (std::size_t s0 = 0; s0 < per; ++s0)
        for (std::size_t s1 = 0; s1 < per; ++s1)
            for (std::size_t s2 = 0; s2 < per; ++s2) {
                const ModuleSelection sel{s0, s1, s2};
                double total = 0.0;
                for (std::size_t ep = 0; ep < rollouts_per_combo; ++ep)
                    total += rollout_return(lib.actor, sel, env, rng);
                const double mean = total / static_cast<double>(rollouts_per_combo);
                if (mean > best_return) {
                    best_return = mean;
                    best = sel;
                }
            }
    return best;
}

namespace {

struct RolloutStep {
    std::vector<Vector> obs;
    int action = 0;
    double reward = 0.0;
    bool done = false;
    double logp = 0.0;
    double value = 0.0;
};

// One PPO update over a collected on-policy batch.
void ppo_update(ModularChainPolicy& actor, ModularChainPolicy& critic, ChainAdam& actor_opt,
                ChainAdam& critic_opt, const ModuleSelection& sel,
                const std::vector<RolloutStep>& batch, double bootstrap_value,
                const PpoConfig& cfg, Rng& rng) {
    const std::size_t n = batch.size();
    if (n == 0) return;
    const std::vector<std::size_t> selv = to_vec(sel, actor.banks.size());

    // GAE over the chunk; episodes are delimited by done flags.
    Vector adv(n, 0.0), ret(n, 0.0);
    double running = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double nonterminal = batch[t].done ? 0.0 : 1.0;
        const double next_value = (t + 1 < n) ? batch[t + 1].value : bootstrap_value;
        const double delta =
            batch[t].reward + cfg.gamma * next_value * nonterminal - batch[t].value;
        running = delta + cfg.gamma * cfg.gae_lambda * nonterminal * running;
        adv[t] = running;
        ret[t] = adv[t] + batch[t].value;
    }
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double stddev = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (stddev + 1e-8);

    ModularTape actor_tape = actor.make_tape();
    ModularTape critic_tape = critic.make_tape();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        fisher_yates(order, rng);
        for (std::size_t start = 0; start < n; start += cfg.minibatch) {
            const std::size_t m = std::min(cfg.minibatch, n - start);
            std::vector<Matrix> slices(actor.slice_dims.size());
            for (std::size_t lvl = 0; lvl < slices.size(); ++lvl)
                slices[lvl] = Matrix(m, actor.slice_dims[lvl]);
            for (std::size_t r = 0; r < m; ++r) {
                const RolloutStep& st = batch[order[start + r]];
                for (std::size_t lvl = 0; lvl < slices.size(); ++lvl)
                    std::copy(st.obs[lvl].begin(), st.obs[lvl].end(),
                              slices[lvl].data.begin() + r * st.obs[lvl].size());
            }

            // Actor: clipped surrogate plus entropy bonus.
            ModularChainPolicy::BatchCache acache;
            const Matrix logits = actor.forward_batch(selv, slices, &acache);
            Matrix aup(m, logits.cols);
            for (std::size_t r = 0; r < m; ++r) {
                const RolloutStep& st = batch[order[start + r]];
                Vector row(logits.cols);
                for (std::size_t j = 0; j < logits.cols; ++j) row[j] = logits(r, j);
                const Vector p = softmax(row);
                const double logp_new = std::log(std::max(p[st.action], 1e-300));
                const double ratio = std::exp(logp_new - st.logp);
                const double a = adv[order[start + r]];
                const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
                // d min(r*a, clip(r)*a) / d ratio
                double dratio;
                if (ratio * a <= clipped * a)
                    dratio = a;
                else
                    dratio = (ratio > 1.0 - cfg.clip && ratio < 1.0 + cfg.clip) ? a : 0.0;
                double entropy = 0.0;
                for (double pj : p)
                    if (pj > 0.0) entropy -= pj * std::log(pj);
                for (std::size_t j = 0; j < logits.cols; ++j) {
                    const double onehot = (static_cast<int>(j) == st.action) ? 1.0 : 0.0;
                    const double dsurr = dratio * ratio * (onehot - p[j]);
                    const double dent = p[j] * (std::log(std::max(p[j], 1e-300)) + entropy);
                    aup(r, j) = (-dsurr + cfg.entropy_coef * dent) / static_cast<double>(m);
                }
            }
            actor_tape.zero();
            actor.backward_batch(acache, aup, actor_tape);
            actor_opt.step(actor, actor_tape, sel, cfg.lr);

            // Critic: regress the taken action's Q toward the lambda-return.
            ModularChainPolicy::BatchCache ccache;
            const Matrix q = critic.forward_batch(selv, slices, &ccache);
            Matrix cup(m, q.cols);
            for (std::size_t r = 0; r < m; ++r) {
                const RolloutStep& st = batch[order[start + r]];
                cup(r, static_cast<std::size_t>(st.action)) =
                    2.0 * (q(r, static_cast<std::size_t>(st.action)) - ret[order[start + r]]) /
                    static_cast<double>(m);
            }
            critic_tape.zero();
            critic.backward_batch(ccache, cup, critic_tape);
            critic_opt.step(critic, critic_tape, sel, cfg.lr);
        }
    }
}

}  // namespace

ExploreResult explore(const ModuleLibrary& lib, const ModuleSelection& sel, TaskEnv& env,
                      std::size_t steps, const PpoConfig& cfg, TaskReplay& replay, Rng& rng) {
    if (!lib.initialized()) throw NotInitialized("module library is empty");
    lib.actor.validate_selection(to_vec(sel, lib.actor.banks.size()));

    ExploreResult result{lib.actor, lib.critic, {}};
    ChainAdam actor_opt(result.actor), critic_opt(result.critic);

    std::size_t taken = 0;
    bool episode_live = false;
    double episode_return = 0.0;
    std::vector<RolloutStep> batch;
    while (taken < steps) {
        const std::size_t chunk = std::min(cfg.steps_per_update, steps - taken);
        batch.clear();
        batch.reserve(chunk);
        for (std::size_t i = 0; i < chunk; ++i) {
            if (!episode_live) {
                env.reset(rng);
                episode_live = true;
                episode_return = 0.0;
            }
            RolloutStep st;
            st.obs = obs_slices(env.observe());
            const Vector logits = chain_single(result.actor, sel, st.obs);
            const Vector p = softmax(logits);
            st.action = static_cast<int>(sample_categorical(p, rng));
            st.logp = std::log(std::max(p[st.action], 1e-300));
            const Vector qvals = chain_single(result.critic, sel, st.obs);
            st.value = *std::max_element(qvals.begin(), qvals.end());
            const env::GridStepResult res = env.step(st.action);
            st.reward = res.reward;
            st.done = res.done;
            episode_return += res.reward;

            Transition tr;
            tr.obs = st.obs;
            tr.next = obs_slices(env.observe());
            tr.action = st.action;
            tr.reward = st.reward;
            tr.done = st.done;
            replay.push(std::move(tr), rng);

            if (res.done) {
                result.episode_returns.push_back(episode_return);
                episode_live = false;
            }
            batch.push_back(std::move(st));
        }
        taken += chunk;
        double bootstrap = 0.0;
        if (episode_live && !batch.back().done) {
            const Vector qvals = chain_single(result.critic, sel, obs_slices(env.observe()));
            bootstrap = *std::max_element(qvals.begin(), qvals.end());
        }
        ppo_update(result.actor, result.critic, actor_opt, critic_opt, sel, batch, bootstrap, cfg,
                   rng);
    }
    return result;
}

double bcq_target(double reward, bool done, double gamma, const Vector& next_q_online,
                  const Vector& next_q_target, const Vector& next_probs, double tau) {
    if (done) return reward;
    std::size_t best = next_q_online.size();
    for (std::size_t a = 0; a < next_q_online.size(); ++a) {
        if (next_probs[a] <= tau) continue;
        if (best == next_q_online.size() || next_q_online[a] > next_q_online[best]) best = a;
    }
    if (best == next_q_online.size()) {  // nothing allowed: unrestricted argmax
        best = 0;
        for (std::size_t a = 1; a < next_q_online.size(); ++a)
            if (next_q_online[a] > next_q_online[best]) best = a;
    }
    return reward + gamma * next_q_target[best];
}

void offline_batch_gradients(const ModuleLibrary& lib, const ModularChainPolicy& target_critic,
                             const TaskReplay& rep, const std::vector<std::size_t>& idx,
                             const ModuleSelection& sel, const BcqConfig& cfg, double weight,
                             ModularTape& actor_grad, ModularTape& critic_grad) {
    if (idx.empty()) throw EmptyBatch("offline gradient batch is empty");
    const std::vector<std::size_t> selv = to_vec(sel, lib.actor.banks.size());
    const std::size_t m = idx.size();
    const std::vector<Matrix> obs = gather(rep, idx, false);
    const std::vector<Matrix> next = gather(rep, idx, true);

    // Actor: behavior cloning of the logged actions.
    ModularChainPolicy::BatchCache acache;
    const Matrix logits = lib.actor.forward_batch(selv, obs, &acache);
    Matrix aup(m, logits.cols);
    for (std::size_t r = 0; r < m; ++r) {
        Vector row(logits.cols);
        for (std::size_t j = 0; j < logits.cols; ++j) row[j] = logits(r, j);
        const Vector p = softmax(row);
        const int a = rep.data[idx[r]].action;
        for (std::size_t j = 0; j < logits.cols; ++j)
            aup(r, j) =
                weight * (p[j] - (static_cast<int>(j) == a ? 1.0 : 0.0)) / static_cast<double>(m);
    }
    actor_grad.zero();
    lib.actor.backward_batch(acache, aup, actor_grad);

    // Critic: batch-constrained backup through the target critic.
    ModularChainPolicy::BatchCache scratch;
    const Matrix next_logits = lib.actor.forward_batch(selv, next, &scratch);
    const Matrix next_q = lib.critic.forward_batch(selv, next, &scratch);
    const Matrix next_qt = target_critic.forward_batch(selv, next, &scratch);
    ModularChainPolicy::BatchCache ccache;
    const Matrix q = lib.critic.forward_batch(selv, obs, &ccache);
    Matrix cup(m, q.cols);
    for (std::size_t r = 0; r < m; ++r) {
        const Transition& tr = rep.data[idx[r]];
        Vector row(next_logits.cols), qon(q.cols), qtg(q.cols);
        for (std::size_t j = 0; j < next_logits.cols; ++j) {
            row[j] = next_logits(r, j);
            qon[j] = next_q(r, j);
            qtg[j] = next_qt(r, j);
        }
        const double y = bcq_target(tr.reward, tr.done, cfg.gamma, qon, qtg, softmax(row), cfg.tau);
        const auto a = static_cast<std::size_t>(tr.action);
        cup(r, a) = weight * 2.0 * (q(r, a) - y) / static_cast<double>(m);
    }
    critic_grad.zero();
    lib.critic.backward_batch(ccache, cup, critic_grad);
}

OfflineEval offline_losses(const ModuleLibrary& lib, const TaskReplay& rep,
                           const ModuleSelection& sel, const BcqConfig& cfg) {
    if (rep.empty()) throw EmptyReplay("no replay data to evaluate");
    const std::vector<std::size_t> selv = to_vec(sel, lib.actor.banks.size());
    std::vector<std::size_t> idx(rep.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::vector<Matrix> obs = gather(rep, idx, false);
    const std::vector<Matrix> next = gather(rep, idx, true);

    ModularChainPolicy::BatchCache scratch;
    const Matrix logits = lib.actor.forward_batch(selv, obs, &scratch);
    const Matrix next_logits = lib.actor.forward_batch(selv, next, &scratch);
    const Matrix next_q = lib.critic.forward_batch(selv, next, &scratch);
    const Matrix q = lib.critic.forward_batch(selv, obs, &scratch);

    OfflineEval out;
    for (std::size_t r = 0; r < rep.size(); ++r) {
        const Transition& tr = rep.data[idx[r]];
        Vector row(logits.cols), nrow(logits.cols), qon(q.cols);
        for (std::size_t j = 0; j < logits.cols; ++j) {
            row[j] = logits(r, j);
            nrow[j] = next_logits(r, j);
            qon[j] = next_q(r, j);
        }
        const Vector p = softmax(row);
        out.actor_nll -= std::log(std::max(p[static_cast<std::size_t>(tr.action)], 1e-300));
        const double y = bcq_target(tr.reward, tr.done, cfg.gamma, qon, qon, softmax(nrow), cfg.tau);
        const double res = q(r, static_cast<std::size_t>(tr.action)) - y;
        out.critic_mse += res * res;
    }
    out.actor_nll /= static_cast<double>(rep.size());
    out.critic_mse /= static_cast<double>(rep.size());
    return out;
}

void accommodate_offline(ModuleLibrary& lib, const std::map<std::string, TaskReplay>& replays,
                         const SelectionMap& selections, const BcqConfig& cfg, Rng& rng,
                         const std::map<std::string, double>& task_weights) {
    if (!lib.initialized()) throw NotInitialized("module library is empty");
    for (const auto& [id, w] : task_weights)
        if (w < 0.0 || w > 1.0) throw InvalidConfig("task weight outside [0,1]: " + id);
    bool any = false;
    for (const auto& [id, rep] : replays) {
        if (rep.empty()) continue;
        if (!selections.count(id)) throw UnknownTask("no module selection for task " + id);
        any = true;
    }
    if (!any) throw EmptyReplaySet("no replay data to accommodate from");

    ModularChainPolicy target = lib.critic;
    ChainAdam actor_opt(lib.actor), critic_opt(lib.critic);
    ModularTape actor_tape = lib.actor.make_tape();
    ModularTape critic_tape = lib.critic.make_tape();
    std::size_t critic_updates = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& [id, rep] : replays) {
            if (rep.empty()) continue;
            const auto wit = task_weights.find(id);
            const double w = wit == task_weights.end() ? 1.0 : wit->second;
            if (w == 0.0) continue;
            const ModuleSelection sel = selections.at(id);
            const std::size_t m = std::min(cfg.minibatch, rep.size());
            const std::size_t batches = std::max<std::size_t>(1, rep.size() / cfg.minibatch);
            for (std::size_t b = 0; b < batches; ++b) {
                std::vector<std::size_t> idx(m);
                for (std::size_t i = 0; i < m; ++i) idx[i] = rng.uniform_index(rep.size());
                offline_batch_gradients(lib, target, rep, idx, sel, cfg, w, actor_tape,
                                        critic_tape);
                actor_opt.step(lib.actor, actor_tape, sel, cfg.lr);
                critic_opt.step(lib.critic, critic_tape, sel, cfg.lr);
                if (++critic_updates % cfg.target_sync == 0) target = lib.critic;
            }
        }
    }
}

double evaluate_zero_shot(const ModuleLibrary& lib, const ModuleSelection& sel, TaskEnv& env,
                          std::size_t episodes, double tau, Rng& rng) {
    if (!lib.initialized()) throw NotInitialized("module library is empty");
    if (episodes == 0) throw InvalidConfig("episodes must be positive");
    double total = 0.0;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        env.reset(rng);
        while (!env.episode_done()) {
            const std::vector<Vector> slices = obs_slices(env.observe());
            const Vector probs = softmax(chain_single(lib.actor, sel, slices));
            const Vector q = chain_single(lib.critic, sel, slices);
            // Boltzmann over the Q-values of sufficiently likely actions.
            double hi = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < q.size(); ++a)
                if (probs[a] > tau) hi = std::max(hi, q[a]);
            const bool any = hi > -std::numeric_limits<double>::infinity();
            Vector boltz(q.size(), 0.0);
            double sum = 0.0;
            for (std::size_t a = 0; a < q.size(); ++a) {
                if (any && probs[a] <= tau) continue;
                sum += boltz[a] = std::exp(q[a] - (any ? hi : *std::max_element(q.begin(), q.end())));
            }
            for (double& p : boltz) p /= sum;
            total += env.step(static_cast<int>(sample_categorical(boltz, rng))).reward;
        }
    }
    return total / static_cast<double>(episodes);
}

double evaluate_actor(const ModularChainPolicy& actor, const ModuleSelection& sel, TaskEnv& env,
                      std::size_t episodes, Rng& rng) {
    if (episodes == 0) throw InvalidConfig("evaluation needs at least one episode");
    double total = 0.0;
    for (std::size_t ep = 0; ep < episodes; ++ep) total += rollout_return(actor, sel, env, rng);
    return total / static_cast<double>(episodes);
}

std::vector<Vector> module_mean_activations(const ModuleLibrary& lib, const TaskReplay& rep,
                                            const ModuleSelection& sel) {
    if (!lib.initialized()) throw NotInitialized("module library is empty");
    if (rep.empty()) throw EmptyReplay("replay buffer is empty");
    const std::size_t levels = lib.actor.banks.size();
    std::vector<Vector> mean(levels);
    for (const Transition& tr : rep.data) {
        ModularChainPolicy::BatchCache cache;
        const Matrix out =
            lib.actor.forward_batch(to_vec(sel, levels), single_batch(tr.obs), &cache);
        // level outputs sit after the slice columns of the next level's input;
        // the last level's output is the forward result itself
        for (std::size_t lvl = 0; lvl < levels; ++lvl) {
            const bool last = lvl + 1 == levels;
            const std::size_t skip = last ? 0 : lib.actor.slice_dims[lvl + 1];
            const Matrix& src = last ? out : cache.level_inputs[lvl + 1];
            const std::size_t width = src.cols - skip;
            if (mean[lvl].empty()) mean[lvl].assign(width, 0.0);
            for (std::size_t j = 0; j < width; ++j) mean[lvl][j] += src(0, skip + j);
        }
    }
    for (Vector& v : mean)
        for (double& x : v) x /= static_cast<double>(rep.size());
    return mean;
}

void write_library(BinWriter& w, const ModuleLibrary& lib) {
    const auto write_chain = [&w](const ModularChainPolicy& chain) {
        w.put_u32(static_cast<std::uint32_t>(chain.slice_dims.size()));
        for (std::size_t d : chain.slice_dims) w.put_u32(static_cast<std::uint32_t>(d));
        w.put_u32(static_cast<std::uint32_t>(chain.banks.size()));
        for (const auto& bank : chain.banks) {
            w.put_u32(static_cast<std::uint32_t>(bank.size()));
            for (const ModuleNet& mod : bank) {
                w.put_u32(static_cast<std::uint32_t>(mod.layers.size()));
                for (const DenseLayer& layer : mod.layers) {
                    w.put_u8(static_cast<std::uint8_t>(layer.act));
                    w.put_mat(layer.w);
                    w.put_vec(layer.b);
                }
            }
        }
    };
    write_chain(lib.actor);
    write_chain(lib.critic);
}

ModuleLibrary read_library(BinReader& r) {
    const auto read_chain = [&r]() {
        ModularChainPolicy chain;
        chain.slice_dims.resize(r.get_u32());
        for (std::size_t& d : chain.slice_dims) d = r.get_u32();
        chain.banks.resize(r.get_u32());
        for (auto& bank : chain.banks) {
            bank.resize(r.get_u32());
            for (ModuleNet& mod : bank) {
                mod.layers.resize(r.get_u32());
                for (DenseLayer& layer : mod.layers) {
                    layer.act = static_cast<Activation>(r.get_u8());
                    layer.w = r.get_mat();
                    layer.b = r.get_vec();
                }
            }
        }
        return chain;
    };
    ModuleLibrary lib;
    lib.actor = read_chain();
    lib.critic = read_chain();
    return lib;
}

void write_transitions(BinWriter& w, const TaskReplay& rep) {
    w.put_u64(rep.capacity);
    w.put_u32(static_cast<std::uint32_t>(rep.data.size()));
    for (const Transition& tr : rep.data) {
        const auto write_slices = [&w](const std::vector<Vector>& slices) {
            w.put_u32(static_cast<std::uint32_t>(slices.size()));
            for (const Vector& s : slices) w.put_vec(s);
        };
        write_slices(tr.obs);
        write_slices(tr.next);
        w.put_u32(static_cast<std::uint32_t>(tr.action));
        w.put_f64(tr.reward);
        w.put_u8(tr.done ? 1 : 0);
    }
}

TaskReplay read_transitions(BinReader& r) {
    TaskReplay rep;
    rep.capacity = r.get_u64();
    rep.data.resize(r.get_u32());
    for (Transition& tr : rep.data) {
        const auto read_slices = [&r]() {
            std::vector<Vector> slices(r.get_u32());
            for (Vector& s : slices) s = r.get_vec();
            return slices;
        };
        tr.obs = read_slices();
        tr.next = read_slices();
        tr.action = static_cast<int>(r.get_u32());
        tr.reward = r.get_f64();
        tr.done = r.get_u8() != 0;
    }
    return rep;
}

}  // namespace lcl::comprl
