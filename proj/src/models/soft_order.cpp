#include "lcl/models/soft_order.hpp"

#include <cmath>

#include "lcl/core/errors.hpp"

namespace lcl {

SoftOrderNet::SoftOrderNet(Config c, Rng& rng) : cfg(c) {
    if (cfg.depth == 0) cfg.depth = cfg.k;
    components.reserve(cfg.k);
    for (std::size_t i = 0; i < cfg.k; ++i) {
        DenseLayer layer(cfg.hidden_dim, cfg.hidden_dim, cfg.act);
        layer.init(rng);
        components.push_back(std::move(layer));
    }
}

void SoftOrderNet::add_task(const std::string& task, Rng& rng) {
    TaskParams tp{DenseLayer(cfg.input_dim, cfg.hidden_dim, Activation::Identity),
                  DenseLayer(cfg.hidden_dim, cfg.output_dim, Activation::Identity),
                  Matrix(components.size(), cfg.depth), components.size()};
    tp.e.init(rng);
    tp.d.init(rng);
    for (double& x : tp.psi.data) x = rng.uniform(-0.01, 0.01);
    tasks[task] = std::move(tp);
}

SoftOrderNet::TaskParams& SoftOrderNet::task_params(const std::string& task) {
    const auto it = tasks.find(task);
    if (it == tasks.end()) throw UnknownTask("unknown task: " + task);
    return it->second;
}

const SoftOrderNet::TaskParams& SoftOrderNet::task_params(const std::string& task) const {
    const auto it = tasks.find(task);
    if (it == tasks.end()) throw UnknownTask("unknown task: " + task);
    return it->second;
}

Vector SoftOrderNet::mixture_weights(const Matrix& psi, std::size_t depth_j, std::size_t active) {
    Vector w(active);
    double mx = -1e300;
    for (std::size_t i = 0; i < active; ++i) mx = std::max(mx, psi(i, depth_j));
    double z = 0.0;
    for (std::size_t i = 0; i < active; ++i) {
        w[i] = std::exp(psi(i, depth_j) - mx);
        z += w[i];
    }
    for (double& x : w) x /= z;
    return w;
}

Vector SoftOrderNet::forward(const std::string& task, const Vector& x, bool drop_new) {
    const TaskParams& tp = task_params(task);
    if (drop_new && tp.k_active < 2) throw InvalidConfig("drop_new requires >= 2 components");
    const std::size_t active = drop_new ? tp.k_active - 1 : tp.k_active;

    Cache c;
    c.task = task;
    c.x = x;
    c.drop_new = drop_new;
    c.active = active;
    c.depth_inputs.resize(cfg.depth + 1);
    c.comp_pre.resize(cfg.depth);
    c.comp_post.resize(cfg.depth);
    c.weights.resize(cfg.depth);

    c.depth_inputs[0] = tp.e.forward(x, &c.pre_e);
    for (std::size_t j = 0; j < cfg.depth; ++j) {
        c.comp_pre[j].resize(active);
        c.comp_post[j].resize(active);
        c.weights[j] = mixture_weights(tp.psi, j, active);
        Vector mixed(cfg.hidden_dim, 0.0);
        for (std::size_t i = 0; i < active; ++i) {
            c.comp_post[j][i] = components[i].forward(c.depth_inputs[j], &c.comp_pre[j][i]);
            add_scaled_inplace(mixed, c.comp_post[j][i], c.weights[j][i]);
        }
        c.depth_inputs[j + 1] = std::move(mixed);
    }
    Vector out = tp.d.forward(c.depth_inputs[cfg.depth], &c.pre_d);
    cache_ = std::move(c);
    return out;
}

SoftOrderTape SoftOrderNet::make_tape(const std::string& task) const {
    const TaskParams& tp = task_params(task);
    SoftOrderTape tape;
    tape.components.reserve(components.size());
    for (const auto& comp : components) tape.components.emplace_back(comp);
    tape.e = DenseGrad(tp.e);
    tape.d = DenseGrad(tp.d);
    tape.dpsi = Matrix(tp.psi.rows, tp.psi.cols);
    return tape;
}

SoftOrderTape SoftOrderNet::backward(const Vector& upstream, Wrt wrt) {
    if (!cache_) throw NoCachedForward();
    const Cache& c = *cache_;
    const TaskParams& tp = task_params(c.task);
    SoftOrderTape tape = make_tape(c.task);

    Vector g = tp.d.backward(c.depth_inputs[cfg.depth], c.pre_d, upstream, tape.d.dw, tape.d.db);
    for (std::size_t jj = cfg.depth; jj-- > 0;) {
        const Vector& w = c.weights[jj];
        // softmax jacobian: dpsi_i = w_i (q_i - sum_l w_l q_l), q_i = g . y_i
        Vector q(c.active);
        double qbar = 0.0;
        for (std::size_t i = 0; i < c.active; ++i) {
            q[i] = dot(g, c.comp_post[jj][i]);
            qbar += w[i] * q[i];
        }
        for (std::size_t i = 0; i < c.active; ++i) tape.dpsi(i, jj) += w[i] * (q[i] - qbar);

        Vector din(cfg.hidden_dim, 0.0);
        for (std::size_t i = 0; i < c.active; ++i) {
            const Vector gi = scale(g, w[i]);
            const Vector dx = components[i].backward(c.depth_inputs[jj], c.comp_pre[jj][i], gi,
                                                     tape.components[i].dw, tape.components[i].db);
            add_scaled_inplace(din, dx, 1.0);
        }
        g = std::move(din);
    }
    tp.e.backward(c.x, c.pre_e, g, tape.e.dw, tape.e.db);

    if (wrt == Wrt::StructureOnly)
        for (auto& comp : tape.components) comp.zero();
    if (wrt == Wrt::ComponentsOnly) {
        tape.e.zero();
        tape.d.zero();
        for (double& x : tape.dpsi.data) x = 0.0;
    }
    return tape;
}

void SoftOrderNet::apply_sgd(const std::string& task, const SoftOrderTape& tape, double lr) {
    TaskParams& tp = task_params(task);
    for (std::size_t i = 0; i < components.size(); ++i)
        sgd_step(components[i], tape.components[i], lr);
    sgd_step(tp.e, tape.e, lr);
    sgd_step(tp.d, tape.d, lr);
    add_scaled_inplace(tp.psi, tape.dpsi, -lr);
}

std::size_t SoftOrderNet::add_component(Rng& rng, const std::string& current_task) {
    DenseLayer layer(cfg.hidden_dim, cfg.hidden_dim, cfg.act);
    layer.init(rng);
    components.push_back(std::move(layer));
    if (!current_task.empty()) {
        TaskParams& tp = task_params(current_task);
        Matrix grown(components.size(), cfg.depth);
        for (std::size_t i = 0; i < tp.psi.rows; ++i)
            for (std::size_t j = 0; j < cfg.depth; ++j) grown(i, j) = tp.psi(i, j);
        for (std::size_t j = 0; j < cfg.depth; ++j) grown(components.size() - 1, j) = 1.0;
        tp.psi = std::move(grown);
        tp.k_active = components.size();
    }
    cache_.reset();
    return components.size() - 1;
}

void SoftOrderNet::remove_last_component() {
    components.pop_back();
    for (auto& [task, tp] : tasks) {
        if (tp.k_active > components.size()) {
            tp.k_active = components.size();
            Matrix shrunk(tp.k_active, cfg.depth);
            for (std::size_t i = 0; i < shrunk.rows; ++i)
                for (std::size_t j = 0; j < cfg.depth; ++j) shrunk(i, j) = tp.psi(i, j);
            tp.psi = std::move(shrunk);
        }
    }
    cache_.reset();
}

}  // namespace lcl
