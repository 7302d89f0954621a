#include "lcl/supervised/lifelong.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcl/core/errors.hpp"

namespace lcl::supervised {

namespace {

// dL/dpred for one sample. Logistic labels are +-1 and the loss is
// log(1 + exp(-y * pred)).
double loss_grad(LossKind loss, double pred, double y) {
    if (loss == LossKind::Squared) return pred - y;
    return -y / (1.0 + std::exp(y * pred));
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

void append_refs(std::vector<ExampleRef>& out, const std::string& task, const Dataset& split,
                 LossKind loss) {
    for (std::size_t i = 0; i < split.size(); ++i)
        out.push_back({&task, &split.x[i], split.y[i], loss});
}

void write_layer(BinWriter& w, const DenseLayer& layer) {
    w.put_u8(static_cast<std::uint8_t>(layer.act));
    w.put_mat(layer.w);
    w.put_vec(layer.b);
}

DenseLayer read_layer(BinReader& r) {
    DenseLayer layer;
    layer.act = static_cast<Activation>(r.get_u8());
    layer.w = r.get_mat();
    layer.b = r.get_vec();
    return layer;
}

// --- linear backend: dictionary Phi shared, per-task s(t) is the structure

struct LinearBackend final : ModelBackend {
    LinearFactoredModel m;

    LinearBackend(std::size_t d, std::size_t k, Rng& rng) : m(d, k) { m.init(rng); }

    std::size_t k() const override { return m.k(); }
    std::size_t structure_slots() const override { return 1; }
    bool has_task(const std::string& task) const override {
        return m.coefficients.count(task) != 0;
    }
    void add_task(const std::string& task, Rng& rng) override { m.add_task(task, rng); }

    void set_one_hot(const std::string& task, std::size_t, std::size_t comp) override {
        Vector& s = m.coefficients.at(task);
        std::fill(s.begin(), s.end(), 0.0);
        s.at(comp) = 1.0;
    }

    std::vector<std::size_t> selected_components(const std::string& task) const override {
        const Vector& s = m.coeffs(task);
        std::size_t best = 0;
        for (std::size_t j = 1; j < s.size(); ++j)
            if (std::abs(s[j]) > std::abs(s[best])) best = j;
        return {best};
    }

    double predict_active(const std::string& task, const Vector& x, std::size_t active) const {
        const Vector& s = m.coeffs(task);
        double acc = 0.0;
        for (std::size_t j = 0; j < active; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < m.phi.rows; ++i) col += m.phi(i, j) * x[i];
            acc += s[j] * col;
        }
        return acc;
    }

    double predict(const std::string& task, const Vector& x, bool drop_new) override {
        const std::size_t n = m.coeffs(task).size();
        return predict_active(task, x, drop_new ? n - 1 : n);
    }

    void sgd_batch(const std::vector<ExampleRef>& batch, double lr, StepMask mask,
                   bool drop_new) override {
        if (batch.empty()) return;
        Matrix dphi(m.phi.rows, m.phi.cols);
        std::map<std::string, Vector> ds;
        const double scale = 1.0 / static_cast<double>(batch.size());

        for (const ExampleRef& ref : batch) {
            const Vector& s = m.coeffs(*ref.task);
            const std::size_t active = s.size() - (drop_new ? 1 : 0);
            const Vector& x = *ref.x;
            Vector cols(active, 0.0);  // Phi_j' x per active column
            double pred = 0.0;
            for (std::size_t j = 0; j < active; ++j) {
                for (std::size_t i = 0; i < m.phi.rows; ++i) cols[j] += m.phi(i, j) * x[i];
                pred += s[j] * cols[j];
            }
            const double up = loss_grad(ref.loss, pred, ref.y) * scale;
            if (mask != StepMask::Structure)
                for (std::size_t i = 0; i < m.phi.rows; ++i)
                    for (std::size_t j = 0; j < active; ++j) dphi(i, j) += up * x[i] * s[j];
            if (mask != StepMask::InitComponents) {
                Vector& dsv = ds.try_emplace(*ref.task, Vector(s.size(), 0.0)).first->second;
                for (std::size_t j = 0; j < active; ++j) dsv[j] += up * cols[j];
            }
        }

        if (mask == StepMask::InitComponents) {
            add_scaled_inplace(m.phi, dphi, -lr);
        } else if (mask == StepMask::StructureAndNew) {
            const std::size_t last = m.phi.cols - 1;
            for (std::size_t i = 0; i < m.phi.rows; ++i) m.phi(i, last) -= lr * dphi(i, last);
        }
        for (const auto& [task, dsv] : ds) {
            Vector& s = m.coefficients.at(task);
            for (std::size_t j = 0; j < dsv.size(); ++j) s[j] -= lr * dsv[j];
        }
    }

    Vector component_grad(const std::vector<ExampleRef>& batch) override {
        Matrix dphi(m.phi.rows, m.phi.cols);
        if (batch.empty()) return dphi.data;
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (const ExampleRef& ref : batch) {
            const double pred = m.forward(*ref.task, *ref.x);
            const double up = loss_grad(ref.loss, pred, ref.y) * scale;
            m.backward(*ref.task, *ref.x, up, &dphi, nullptr);
        }
        return dphi.data;
    }

    Vector component_params() const override { return m.phi.data; }
    void set_component_params(const Vector& p) override {
        if (p.size() != m.phi.data.size()) throw SliceShapeMismatch("component vector size");
        m.phi.data = p;
    }
    Vector structure_params(const std::string& task) const override { return m.coeffs(task); }

    std::size_t add_component(Rng& rng, const std::string& task) override {
        m.add_component(rng);
        m.coefficients.at(task).resize(m.k(), 0.0);
        return m.k() - 1;
    }
    void remove_last_component() override { m.remove_last_component(); }

    void save_state(BinWriter& w) const override {
        w.put_mat(m.phi);
        w.put_u32(static_cast<std::uint32_t>(m.coefficients.size()));
        for (const auto& [task, coeff] : m.coefficients) {
            w.put_str(task);
            w.put_vec(coeff);
        }
    }
    void load_state(BinReader& r) override {
        m.phi = r.get_mat();
        m.coefficients.clear();
        const std::uint32_t n = r.get_u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            std::string task = r.get_str();
            m.coefficients[std::move(task)] = r.get_vec();
        }
    }
};

// --- soft-ordering backend: shared dense components, per-task Psi/E/D

constexpr double kOneHotLogit = 30.0;  // softmax weight within 1e-12 of one

struct SoftOrderBackend final : ModelBackend {
    SoftOrderNet net;

    SoftOrderBackend(SoftOrderNet::Config c, Rng& rng) : net(c, rng) {}

    std::size_t k() const override { return net.components.size(); }
    std::size_t structure_slots() const override { return net.cfg.depth; }
    bool has_task(const std::string& task) const override { return net.tasks.count(task) != 0; }
    void add_task(const std::string& task, Rng& rng) override { net.add_task(task, rng); }

    void set_one_hot(const std::string& task, std::size_t slot, std::size_t comp) override {
        Matrix& psi = net.tasks.at(task).psi;
        for (std::size_t i = 0; i < psi.rows; ++i) psi(i, slot) = i == comp ? kOneHotLogit : 0.0;
    }

    std::vector<std::size_t> selected_components(const std::string& task) const override {
        const auto& tp = net.tasks.at(task);
        std::vector<std::size_t> picks(net.cfg.depth, 0);
        for (std::size_t j = 0; j < net.cfg.depth; ++j)
            for (std::size_t i = 1; i < tp.k_active; ++i)
                if (tp.psi(i, j) > tp.psi(picks[j], j)) picks[j] = i;
        return picks;
    }

    double predict(const std::string& task, const Vector& x, bool drop_new) override {
        return net.forward(task, x, drop_new)[0];
    }

    void sgd_batch(const std::vector<ExampleRef>& batch, double lr, StepMask mask,
                   bool drop_new) override {
        if (batch.empty()) return;
        const double scale = 1.0 / static_cast<double>(batch.size());
        // Tapes collected first, applied afterwards: parameters stay frozen
        // across the minibatch.
        std::vector<std::pair<const std::string*, SoftOrderTape>> tapes;
        tapes.reserve(batch.size());
        for (const ExampleRef& ref : batch) {
            const Vector out = net.forward(*ref.task, *ref.x, drop_new);
            const double up = loss_grad(ref.loss, out[0], ref.y) * scale;
            const Wrt wrt = mask == StepMask::Structure ? Wrt::StructureOnly : Wrt::All;
            SoftOrderTape tape = net.backward(Vector{up}, wrt);
            if (mask == StepMask::InitComponents)
                for (double& v : tape.dpsi.data) v = 0.0;
            if (mask == StepMask::StructureAndNew)
                for (std::size_t i = 0; i + 1 < tape.components.size(); ++i)
                    tape.components[i].zero();
            tapes.emplace_back(ref.task, std::move(tape));
        }
        for (auto& [task, tape] : tapes) net.apply_sgd(*task, tape, lr);
    }

    std::size_t flat_size() const {
        std::size_t n = 0;
        for (const DenseLayer& c : net.components) n += c.w.data.size() + c.b.size();
        return n;
    }

    Vector component_grad(const std::vector<ExampleRef>& batch) override {
        Vector g(flat_size(), 0.0);
        if (batch.empty()) return g;
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (const ExampleRef& ref : batch) {
            const Vector out = net.forward(*ref.task, *ref.x, false);
            const double up = loss_grad(ref.loss, out[0], ref.y) * scale;
            const SoftOrderTape tape = net.backward(Vector{up}, Wrt::ComponentsOnly);
            std::size_t at = 0;
            for (const DenseGrad& cg : tape.components) {
                for (double v : cg.dw.data) g[at++] += v;
                for (double v : cg.db) g[at++] += v;
            }
        }
        return g;
    }

    Vector component_params() const override {
        Vector p;
        p.reserve(flat_size());
        for (const DenseLayer& c : net.components) {
            p.insert(p.end(), c.w.data.begin(), c.w.data.end());
            p.insert(p.end(), c.b.begin(), c.b.end());
        }
        return p;
    }

    void set_component_params(const Vector& p) override {
        if (p.size() != flat_size()) throw SliceShapeMismatch("component vector size");
        std::size_t at = 0;
        for (DenseLayer& c : net.components) {
            for (double& v : c.w.data) v = p[at++];
            for (double& v : c.b) v = p[at++];
        }
    }

    Vector structure_params(const std::string& task) const override {
        const auto& tp = net.tasks.at(task);
        Vector p = tp.psi.data;
        p.insert(p.end(), tp.e.w.data.begin(), tp.e.w.data.end());
        p.insert(p.end(), tp.e.b.begin(), tp.e.b.end());
        p.insert(p.end(), tp.d.w.data.begin(), tp.d.w.data.end());
        p.insert(p.end(), tp.d.b.begin(), tp.d.b.end());
        return p;
    }

    std::size_t add_component(Rng& rng, const std::string& task) override {
        return net.add_component(rng, task);
    }
    void remove_last_component() override { net.remove_last_component(); }

    void save_state(BinWriter& w) const override {
        w.put_u32(static_cast<std::uint32_t>(net.components.size()));
        for (const DenseLayer& c : net.components) write_layer(w, c);
        w.put_u32(static_cast<std::uint32_t>(net.tasks.size()));
        for (const auto& [task, tp] : net.tasks) {
            w.put_str(task);
            write_layer(w, tp.e);
            write_layer(w, tp.d);
            w.put_mat(tp.psi);
            w.put_u64(tp.k_active);
        }
    }
    void load_state(BinReader& r) override {
        net.components.resize(r.get_u32());
        for (DenseLayer& c : net.components) c = read_layer(r);
        net.tasks.clear();
        const std::uint32_t n = r.get_u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::string task = r.get_str();
            SoftOrderNet::TaskParams tp;
            tp.e = read_layer(r);
            tp.d = read_layer(r);
            tp.psi = r.get_mat();
            tp.k_active = r.get_u64();
            net.tasks.emplace(task, std::move(tp));
        }
    }
};

void sgd_epochs(ModelBackend& model, Rng& rng, const LearnerConfig& cfg,
                std::vector<ExampleRef> pool, std::size_t epochs, StepMask mask,
                bool paired_drop) {
    if (pool.empty()) return;
    for (std::size_t e = 0; e < epochs; ++e) {
        fisher_yates(pool, rng);
        for (std::size_t start = 0; start < pool.size(); start += cfg.minibatch) {
            const std::size_t end = std::min(pool.size(), start + cfg.minibatch);
            const std::vector<ExampleRef> batch(pool.begin() + start, pool.begin() + end);
            model.sgd_batch(batch, cfg.lr, mask, false);
            if (paired_drop) model.sgd_batch(batch, cfg.lr, StepMask::Structure, true);
        }
    }
}

void plain_step(LifelongLearner& l, const Vector& g) {
    Vector p = l.model->component_params();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= l.cfg.lr * g[i];
    l.model->set_component_params(p);
}

// Anchor penalty handled implicitly (backward Euler on the quadratic term):
// the applied update equals -lr * (g + lambda * sum_t F_t (phi_new - anchor_t))
// with the penalty gradient taken at the updated point, which stays stable for
// arbitrarily large lambda and freezes the components in the lambda -> inf
// limit. Anchors recorded before an expansion simply leave the new slots
// unpenalised.
void ewc_step(LifelongLearner& l, const Vector& g) {
    Vector p = l.model->component_params();
    Vector a(p.size(), 0.0);
    Vector b(p.size(), 0.0);
    for (const FisherDiag& f : l.anchors)
        for (std::size_t i = 0; i < std::min(f.diag.size(), p.size()); ++i) {
            a[i] += l.cfg.ewc_lambda * f.diag[i];
            b[i] += l.cfg.ewc_lambda * f.diag[i] * f.anchor[i];
        }
    const double inv = 1.0 / l.cfg.lr;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = (p[i] * inv - g[i] + b[i]) / (inv + a[i]);
    l.model->set_component_params(p);
}

void replay_sweep(LifelongLearner& l) {
    for (const auto& [id, batch] : l.replay.buffers) {
        std::vector<ExampleRef> refs;
        append_refs(refs, id, batch.data, batch.loss);
        plain_step(l, l.model->component_grad(refs));
    }
}

void store_anchor(LifelongLearner& l, const SupervisedTask& task) {
    Vector p = l.model->component_params();
    Vector f(p.size(), 0.0);
    for (std::size_t i = 0; i < task.train.size(); ++i) {
        std::vector<ExampleRef> one;
        one.push_back({&task.id, &task.train.x[i], task.train.y[i], task.loss});
        const Vector g = l.model->component_grad(one);
        for (std::size_t j = 0; j < f.size(); ++j) f[j] += g[j] * g[j];
    }
    if (task.train.size() > 0)
        for (double& v : f) v /= static_cast<double>(task.train.size());
    for (FisherDiag& old : l.anchors)
        if (old.task == task.id) {
            old.diag = std::move(f);
            old.anchor = std::move(p);
            return;
        }
    l.anchors.push_back({task.id, std::move(f), std::move(p)});
}

}  // namespace

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
    if (spec.d == 0 || spec.k_true == 0 || spec.samples_per_task == 0)
        throw InvalidConfig("synthetic spec needs d, k_true, samples >= 1");
    if (spec.k_true > spec.d) throw InvalidConfig("synthetic spec needs k_true <= d");
    if (spec.tasks < spec.k_true) throw InvalidConfig("synthetic spec needs T >= k_true");
    if (spec.noise_std < 0.0) throw InvalidConfig("synthetic spec needs noise_std >= 0");

    SyntheticBenchmark bench;
    bench.phi_star = Matrix(spec.d, spec.k_true);
    for (std::size_t j = 0; j < spec.k_true; ++j) {
        double norm = 0.0;
        for (std::size_t i = 0; i < spec.d; ++i) {
            bench.phi_star(i, j) = rng.normal();
            norm += bench.phi_star(i, j) * bench.phi_star(i, j);
        }
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < spec.d; ++i) bench.phi_star(i, j) /= norm;
    }

    const std::size_t n_val = std::max<std::size_t>(1, spec.samples_per_task / 4);
    for (std::size_t t = 0; t < spec.tasks; ++t) {
        // The first k_true tasks each read exactly one distinct column, so any
        // method that sees them observes every ground-truth direction (this is
        // what T >= k_true buys); later tasks mix one or two random columns.
        Vector s(spec.k_true, 0.0);
        if (t < spec.k_true) {
            s[t] = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        } else {
            const std::size_t nnz = spec.k_true == 1 ? 1 : 1 + rng.uniform_index(2);
            const std::size_t first = rng.uniform_index(spec.k_true);
            s[first] = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            if (nnz == 2) {
                std::size_t second = rng.uniform_index(spec.k_true - 1);
                if (second >= first) ++second;
                s[second] = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            }
        }

        SupervisedTask task;
        task.id = "syn-" + std::to_string(t);
        task.loss = spec.loss;
        const auto fill = [&](Dataset& split, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                Vector x = rng.normal_vec(spec.d);
                double f = 0.0;
                for (std::size_t jj = 0; jj < spec.k_true; ++jj) {
                    if (s[jj] == 0.0) continue;
                    double col = 0.0;
                    for (std::size_t ii = 0; ii < spec.d; ++ii)
                        col += bench.phi_star(ii, jj) * x[ii];
                    f += s[jj] * col;
                }
                if (spec.noise_std > 0.0) f += rng.normal(0.0, spec.noise_std);
                split.push(std::move(x), spec.loss == LossKind::Squared ? f
                                         : f >= 0.0                     ? 1.0
                                                                        : -1.0);
            }
        };
        fill(task.train, spec.samples_per_task);
        fill(task.validation, n_val);
        fill(task.test, spec.samples_per_task);
        bench.tasks.push_back(std::move(task));
        bench.s_star.push_back(std::move(s));
    }
    return bench;
}

void ReplayStore::put(const SupervisedTask& task, Rng& rng) {
    const std::size_t n = std::min(capacity, task.train.size());
    std::vector<std::size_t> idx(task.train.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
        std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
    Batch b;
    b.loss = task.loss;
    for (std::size_t i = 0; i < n; ++i) b.data.push(task.train.x[idx[i]], task.train.y[idx[i]]);
    buffers[task.id] = std::move(b);
}

ExpandDecision expand_decision(double a1, double a2, double tau) {
    if (a2 == 0.0) return ExpandDecision::Keep;  // zero baseline
    return (a1 - a2) / std::abs(a2) >= tau ? ExpandDecision::Keep : ExpandDecision::Discard;
}

LifelongLearner LifelongLearner::linear(std::size_t d, std::size_t k, LearnerConfig cfg,
                                        std::uint64_t seed) {
    if (d == 0 || k == 0) throw InvalidConfig("linear learner needs d, k >= 1");
    LifelongLearner l;
    l.cfg = cfg;
    l.rng = Rng(seed);
    l.model = std::make_unique<LinearBackend>(d, k, l.rng);
    l.replay.capacity = cfg.replay_per_task;
    return l;
}

LifelongLearner LifelongLearner::soft_order(SoftOrderNet::Config model_cfg, LearnerConfig cfg,
                                            std::uint64_t seed) {
    LifelongLearner l;
    l.cfg = cfg;
    l.rng = Rng(seed);
    l.model = std::make_unique<SoftOrderBackend>(model_cfg, l.rng);
    l.replay.capacity = cfg.replay_per_task;
    return l;
}

void LifelongLearner::initialize_joint(const std::vector<SupervisedTask>& tasks,
                                       std::size_t epochs) {
    if (initialized) throw InvalidConfig("initialize_joint already ran");
    if (tasks.empty()) throw InvalidConfig("initialization needs at least one task");
    const std::size_t k = model->k();
    const std::size_t per = model->structure_slots();
    const std::size_t slots = tasks.size() * per;
    if (slots < k) throw InvalidConfig("too few structure slots to cover every component");

    for (const SupervisedTask& t : tasks) model->add_task(t.id, rng);

    // Random one-hot picks; k slots chosen at random are stamped with the
    // component index so each component is selected at least once.
    std::vector<std::size_t> pick(slots);
    for (std::size_t& c : pick) c = rng.uniform_index(k);
    std::vector<std::size_t> order(slots);
    std::iota(order.begin(), order.end(), 0);
    fisher_yates(order, rng);
    for (std::size_t c = 0; c < k; ++c) pick[order[c]] = c;
    for (std::size_t i = 0; i < slots; ++i)
        model->set_one_hot(tasks[i / per].id, i % per, pick[i]);

    std::vector<ExampleRef> pool;
    for (const SupervisedTask& t : tasks) append_refs(pool, t.id, t.train, t.loss);
    sgd_epochs(*model, rng, cfg, std::move(pool), epochs, StepMask::InitComponents, false);
    initialized = true;
}

void LifelongLearner::assimilate(const SupervisedTask& task, AssimilationMode mode,
                                 std::size_t epochs) {
    if (!initialized) throw NotInitialized("initialize_joint must run first");
    if (pending_component) throw InvalidConfig("unresolved expansion; call expand_check");
    if (!model->has_task(task.id)) model->add_task(task.id, rng);

    std::vector<ExampleRef> pool;
    append_refs(pool, task.id, task.train, task.loss);
    if (mode == AssimilationMode::Compositional) {
        sgd_epochs(*model, rng, cfg, std::move(pool), epochs, StepMask::Structure, false);
    } else {
        pending_component = model->add_component(rng, task.id);
        pending_task = task.id;
        sgd_epochs(*model, rng, cfg, std::move(pool), epochs, StepMask::StructureAndNew, true);
    }
}

void LifelongLearner::adapt(const SupervisedTask& task, AdaptationBase base, std::size_t epochs) {
    if (!initialized) throw NotInitialized("initialize_joint must run first");
    if (pending_component) throw InvalidConfig("unresolved expansion; call expand_check");
    if (!model->has_task(task.id)) throw UnknownTask("adapt before assimilation: " + task.id);
    if (base == AdaptationBase::Er && task.train.size() == 0 && replay.buffers.empty())
        throw EmptyReplay("no replay batches and no current data");

    std::vector<ExampleRef> pool;
    append_refs(pool, task.id, task.train, task.loss);

    for (std::size_t e = 0; e < epochs; ++e) {
        fisher_yates(pool, rng);
        bool stepped = false;
        for (std::size_t start = 0; start < pool.size(); start += cfg.minibatch) {
            const std::size_t end = std::min(pool.size(), start + cfg.minibatch);
            const std::vector<ExampleRef> batch(pool.begin() + start, pool.begin() + end);
            const Vector g = model->component_grad(batch);
            if (base == AdaptationBase::Ewc)
                ewc_step(*this, g);
            else
                plain_step(*this, g);
            if (base == AdaptationBase::Er) replay_sweep(*this);
            stepped = true;
        }
        if (base == AdaptationBase::Er && !stepped) replay_sweep(*this);
    }

    if (base == AdaptationBase::Ewc) store_anchor(*this, task);
    if (base == AdaptationBase::Er) replay.put(task, rng);
}

ExpandDecision LifelongLearner::expand_check(const SupervisedTask& task, double tau) {
    if (!pending_component) throw InvalidConfig("no pending component; run dynamic assimilation");
    if (task.id != pending_task)
        throw InvalidConfig("expansion pending for task " + pending_task);
    if (task.validation.size() == 0) throw InvalidConfig("expand_check needs validation data");

    const double a1 = evaluate(task, task.validation, false);
    const double a2 = evaluate(task, task.validation, true);
    const ExpandDecision d = expand_decision(a1, a2, tau);
    if (d == ExpandDecision::Discard) model->remove_last_component();
    pending_component.reset();
    pending_task.clear();
    return d;
}

double LifelongLearner::evaluate(const SupervisedTask& task, const Dataset& split,
                                 bool drop_new) {
    if (split.size() == 0) throw EmptyBatch("evaluate on an empty split");
    if (task.loss == LossKind::Squared) {
        double mse = 0.0;
        for (std::size_t i = 0; i < split.size(); ++i) {
            const double e = model->predict(task.id, split.x[i], drop_new) - split.y[i];
            mse += e * e;
        }
        return -std::sqrt(mse / static_cast<double>(split.size()));
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const double pred = model->predict(task.id, split.x[i], drop_new) >= 0.0 ? 1.0 : -1.0;
        if (pred == split.y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

double LifelongLearner::rmse(const SupervisedTask& task, const Dataset& split) {
    if (split.size() == 0) throw EmptyBatch("rmse on an empty split");
    double mse = 0.0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const double e = model->predict(task.id, split.x[i], false) - split.y[i];
        mse += e * e;
    }
    return std::sqrt(mse / static_cast<double>(split.size()));
}

double LifelongLearner::ewc_penalty() const {
    const Vector p = model->component_params();
    double acc = 0.0;
    for (const FisherDiag& f : anchors)
        for (std::size_t i = 0; i < std::min(f.diag.size(), p.size()); ++i) {
            const double d = p[i] - f.anchor[i];
            acc += f.diag[i] * d * d;
        }
    return 0.5 * cfg.ewc_lambda * acc;
}

LinearFactoredModel train_mtl_oracle(const std::vector<SupervisedTask>& tasks, std::size_t d,
                                     std::size_t k, std::size_t epochs, const LearnerConfig& cfg,
                                     Rng& rng) {
    LinearFactoredModel m(d, k);
    m.init(rng);
    for (const SupervisedTask& t : tasks) m.add_task(t.id, rng);

    std::vector<ExampleRef> pool;
    for (const SupervisedTask& t : tasks) append_refs(pool, t.id, t.train, t.loss);
    for (std::size_t e = 0; e < epochs; ++e) {
        fisher_yates(pool, rng);
        for (std::size_t start = 0; start < pool.size(); start += cfg.minibatch) {
            const std::size_t end = std::min(pool.size(), start + cfg.minibatch);
            Matrix dphi(d, k);
            std::map<std::string, Vector> ds;
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const ExampleRef& ref = pool[i];
                const double pred = m.forward(*ref.task, *ref.x);
                const double up = loss_grad(ref.loss, pred, ref.y) * scale;
                Vector& dsv = ds.try_emplace(*ref.task, Vector(k, 0.0)).first->second;
                m.backward(*ref.task, *ref.x, up, &dphi, &dsv);
            }
            add_scaled_inplace(m.phi, dphi, -cfg.lr);
            for (const auto& [task, dsv] : ds)
                add_scaled_inplace(m.coefficients.at(task), dsv, -cfg.lr);
        }
    }
    return m;
}

Vector train_monolithic(const std::vector<SupervisedTask>& tasks, std::size_t d,
                        std::size_t epochs, const LearnerConfig& cfg, Rng& rng) {
    Vector w(d, 0.0);
    std::vector<std::size_t> idx;
    for (const SupervisedTask& t : tasks) {
        idx.resize(t.train.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t e = 0; e < epochs; ++e) {
            fisher_yates(idx, rng);
            for (std::size_t start = 0; start < idx.size(); start += cfg.minibatch) {
                const std::size_t end = std::min(idx.size(), start + cfg.minibatch);
                Vector g(d, 0.0);
                const double scale = 1.0 / static_cast<double>(end - start);
                for (std::size_t i = start; i < end; ++i) {
                    const Vector& x = t.train.x[idx[i]];
                    const double up =
                        loss_grad(t.loss, dot(w, x), t.train.y[idx[i]]) * scale;
                    add_scaled_inplace(g, x, up);
                }
                add_scaled_inplace(w, g, -cfg.lr);
            }
        }
    }
    return w;
}

double model_rmse(const LinearFactoredModel& m, const std::string& task, const Dataset& split) {
    if (split.size() == 0) throw EmptyBatch("rmse on an empty split");
    double mse = 0.0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const double e = m.forward(task, split.x[i]) - split.y[i];
        mse += e * e;
    }
    return std::sqrt(mse / static_cast<double>(split.size()));
}

double vector_rmse(const Vector& w, const Dataset& split) {
    if (split.size() == 0) throw EmptyBatch("rmse on an empty split");
    double mse = 0.0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const double e = dot(w, split.x[i]) - split.y[i];
        mse += e * e;
    }
    return std::sqrt(mse / static_cast<double>(split.size()));
}

void LifelongLearner::save_state(BinWriter& w) const {
    for (std::uint64_t word : rng.state) w.put_u64(word);
    model->save_state(w);
    w.put_u64(replay.capacity);
    w.put_u32(static_cast<std::uint32_t>(replay.buffers.size()));
    for (const auto& [task, batch] : replay.buffers) {
        w.put_str(task);
        w.put_u8(static_cast<std::uint8_t>(batch.loss));
        w.put_u32(static_cast<std::uint32_t>(batch.data.size()));
        for (std::size_t i = 0; i < batch.data.size(); ++i) {
            w.put_vec(batch.data.x[i]);
            w.put_f64(batch.data.y[i]);
        }
    }
    w.put_u32(static_cast<std::uint32_t>(anchors.size()));
    for (const FisherDiag& a : anchors) {
        w.put_str(a.task);
        w.put_vec(a.diag);
        w.put_vec(a.anchor);
    }
    w.put_u8(initialized ? 1 : 0);
    w.put_u8(pending_component.has_value() ? 1 : 0);
    if (pending_component) w.put_u64(*pending_component);
    w.put_str(pending_task);
}

void LifelongLearner::load_state(BinReader& r) {
    for (std::uint64_t& word : rng.state) word = r.get_u64();
    model->load_state(r);
    replay.capacity = r.get_u64();
    replay.buffers.clear();
    const std::uint32_t nbuf = r.get_u32();
    for (std::uint32_t i = 0; i < nbuf; ++i) {
        const std::string task = r.get_str();
        ReplayStore::Batch batch;
        batch.loss = static_cast<LossKind>(r.get_u8());
        const std::uint32_t rows = r.get_u32();
        for (std::uint32_t j = 0; j < rows; ++j) {
            Vector x = r.get_vec();
            const double y = r.get_f64();
            batch.data.push(std::move(x), y);
        }
        replay.buffers.emplace(task, std::move(batch));
    }
    anchors.resize(r.get_u32());
    for (FisherDiag& a : anchors) {
        a.task = r.get_str();
        a.diag = r.get_vec();
        a.anchor = r.get_vec();
    }
    initialized = r.get_u8() != 0;
    if (r.get_u8() != 0)
        pending_component = r.get_u64();
    else
        pending_component.reset();
    pending_task = r.get_str();
}

}  // namespace lcl::supervised
