#include <json.hpp>

#include "lcl/core/errors.hpp"
#include "lcl/harness/harness.hpp"

namespace lcl::harness {

using nlohmann::json;

namespace {

// Pulls a typed value out of `j[key]`, naming the full dotted path on any
// mismatch, and erases consumed keys so leftovers can be reported.
struct FieldReader {
    json& j;
    std::string prefix;

    template <typename T>
    void take(const char* key, T& out) {
        if (!j.contains(key)) return;
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("bad value for config key: " + prefix + key);
        }
        j.erase(key);
    }

    json take_object(const char* key) {
        if (!j.contains(key)) return json::object();
        if (!j.at(key).is_object())
            throw ConfigError("expected an object at config key: " + prefix + key);
        json obj = j.at(key);
        j.erase(key);
        return obj;
    }

    void finish() const {
        for (const auto& item : j.items())
            throw ConfigError("unknown config key: " + prefix + item.key());
    }
};

void check_choice(const std::string& value, std::initializer_list<const char*> allowed,
                  const char* key) {
    for (const char* a : allowed)
        if (value == a) return;
    throw ConfigError(std::string("unsupported value for ") + key + ": " + value);
}

ExperimentConfig from_json(json root) {
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    ExperimentConfig cfg;

    FieldReader top{root, ""};
    top.take("algorithm", cfg.algorithm);
    top.take("adaptation", cfg.adaptation);
    top.take("taskSet", cfg.task_set);
    top.take("tasks", cfg.tasks);
    top.take("seed", cfg.seed);
    top.take("outDir", cfg.out_dir);
    top.take("stopAfterTasks", cfg.stop_after_tasks);

    json sub = top.take_object("schedule");
    FieldReader sched{sub, "schedule."};
    sched.take("structureUpdates", cfg.schedule.structure_updates);
    sched.take("adaptationFrequency", cfg.schedule.adaptation_frequency);
    sched.take("componentUpdates", cfg.schedule.component_updates);
    sched.finish();

    json sup = top.take_object("supervised");
    FieldReader sr{sup, "supervised."};
    sr.take("model", cfg.supervised.model);
    sr.take("d", cfg.supervised.d);
    sr.take("kTrue", cfg.supervised.k_true);
    sr.take("k", cfg.supervised.k);
    sr.take("tasks", cfg.supervised.tasks);
    sr.take("samplesPerTask", cfg.supervised.samples_per_task);
    sr.take("noiseStd", cfg.supervised.noise_std);
    sr.take("initTasks", cfg.supervised.init_tasks);
    sr.take("initEpochs", cfg.supervised.init_epochs);
    sr.take("hidden", cfg.supervised.hidden);
    sr.take("depth", cfg.supervised.depth);
    sr.take("minibatch", cfg.supervised.minibatch);
    sr.take("lr", cfg.supervised.lr);
    sr.take("ewcLambda", cfg.supervised.ewc_lambda);
    sr.take("replayPerTask", cfg.supervised.replay_per_task);
    sr.take("expansionTau", cfg.supervised.expansion_tau);
    sr.finish();

    json lpg = top.take_object("lpgFtw");
    FieldReader lr{lpg, "lpgFtw."};
    lr.take("d", cfg.lpg.d);
    lr.take("kMax", cfg.lpg.k_max);
    lr.take("tasks", cfg.lpg.tasks);
    lr.take("horizon", cfg.lpg.horizon);
    lr.take("lambda", cfg.lpg.lambda);
    lr.take("mu", cfg.lpg.mu);
    lr.take("sigma", cfg.lpg.sigma);
    lr.take("episodesPerStep", cfg.lpg.episodes_per_step);
    lr.take("lr", cfg.lpg.lr);
    lr.take("delta", cfg.lpg.delta);
    lr.take("gamma", cfg.lpg.gamma);
    lr.take("base", cfg.lpg.base);
    lr.take("evalEpisodes", cfg.lpg.eval_episodes);
    lr.finish();

    json comp = top.take_object("comprl");
    FieldReader cr{comp, "comprl."};
    cr.take("hidden", cfg.comp.hidden);
    cr.take("replayCapacity", cfg.comp.replay_capacity);
    cr.take("explorationSteps", cfg.comp.exploration_steps);
    cr.take("selectMode", cfg.comp.select_mode);
    cr.take("curriculum", cfg.comp.curriculum);
    cr.take("evalEpisodes", cfg.comp.eval_episodes);
    cr.take("zeroShotTau", cfg.comp.zero_shot_tau);
    cr.take("zeroShotTasks", cfg.comp.zero_shot_tasks);
    json ppo = cr.take_object("ppo");
    FieldReader pr{ppo, "comprl.ppo."};
    pr.take("lr", cfg.comp.ppo.lr);
    pr.take("stepsPerUpdate", cfg.comp.ppo.steps_per_update);
    pr.take("minibatch", cfg.comp.ppo.minibatch);
    pr.take("epochs", cfg.comp.ppo.epochs);
    pr.take("gaeLambda", cfg.comp.ppo.gae_lambda);
    pr.take("gamma", cfg.comp.ppo.gamma);
    pr.take("entropyCoef", cfg.comp.ppo.entropy_coef);
    pr.take("clip", cfg.comp.ppo.clip);
    pr.finish();
    json bcq = cr.take_object("bcq");
    FieldReader br{bcq, "comprl.bcq."};
    br.take("tau", cfg.comp.bcq.tau);
    br.take("lr", cfg.comp.bcq.lr);
    br.take("minibatch", cfg.comp.bcq.minibatch);
    br.take("targetSync", cfg.comp.bcq.target_sync);
    br.take("gamma", cfg.comp.bcq.gamma);
    br.finish();
    cr.finish();

    json ns = top.take_object("nonstat");
    FieldReader nr{ns, "nonstat."};
    nr.take("weighting", cfg.nonstat.weighting);
    nr.take("changingLevels", cfg.nonstat.changing_levels);
    nr.finish();

    json pert = top.take_object("perturbation");
    FieldReader per{pert, "perturbation."};
    per.take("kind", cfg.perturbation.kind);
    per.take("shifts", cfg.perturbation.shifts);
    per.take("degradedEffect", cfg.perturbation.degraded_effect);
    per.take("degradeFrom", cfg.perturbation.degrade_from);
    per.take("degradeTo", cfg.perturbation.degrade_to);
    per.finish();

    top.finish();

    check_choice(cfg.algorithm,
                 {"supervised-comp", "supervised-dyn", "lpg-ftw", "comprl", "comprl-nonstat"},
                 "algorithm");
    check_choice(cfg.adaptation, {"nft", "ewc", "er", "fm"}, "adaptation");
    check_choice(cfg.supervised.model, {"linear", "soft-order"}, "supervised.model");
    check_choice(cfg.lpg.base, {"npg", "reinforce"}, "lpgFtw.base");
    check_choice(cfg.comp.select_mode, {"search", "given"}, "comprl.selectMode");
    check_choice(cfg.nonstat.weighting, {"oracle", "loss", "repr"}, "nonstat.weighting");
    check_choice(cfg.perturbation.kind,
                 {"none", "cyclical-target-shift", "linear-action-degradation", "composite"},
                 "perturbation.kind");
    for (int s : cfg.perturbation.shifts)
        if (s < -3 || s > 3) throw ConfigError("perturbation.shifts entries must be in [-3, 3]");
    if (cfg.perturbation.shifts.empty())
        throw ConfigError("perturbation.shifts must not be empty");
    if (cfg.perturbation.degrade_from < 0.0 || cfg.perturbation.degrade_from > 1.0 ||
        cfg.perturbation.degrade_to < 0.0 || cfg.perturbation.degrade_to > 1.0)
        throw ConfigError("perturbation degradation probabilities must be in [0, 1]");
    if (cfg.perturbation.degraded_effect < 0 || cfg.perturbation.degraded_effect >= 6)
        throw ConfigError("perturbation.degradedEffect must name one of the 6 action effects");
    for (std::size_t lvl : cfg.nonstat.changing_levels)
        if (lvl >= comprl::kLevels) throw ConfigError("nonstat.changingLevels out of range");

    const bool grid = cfg.task_set.rfind("grid-", 0) == 0 || cfg.task_set == "custom";
    if (cfg.algorithm.rfind("supervised", 0) == 0 && cfg.task_set != "synthetic")
        throw ConfigError("taskSet: supervised algorithms run the 'synthetic' task set");
    if (cfg.algorithm == "lpg-ftw" && cfg.task_set != "linear")
        throw ConfigError("taskSet: lpg-ftw runs the 'linear' task set");
    if (cfg.algorithm.rfind("comprl", 0) == 0 && !grid)
        throw ConfigError("taskSet: comprl runs 'grid-all', 'grid-2x2x2', or 'custom'");
    if (grid && cfg.task_set != "custom" && cfg.task_set != "grid-all" &&
        cfg.task_set != "grid-2x2x2")
        throw ConfigError("taskSet: unknown grid task set " + cfg.task_set);
    if (cfg.task_set == "custom") {
        if (cfg.tasks.empty()) throw ConfigError("tasks: custom task set needs explicit ids");
        for (const std::string& id : cfg.tasks) env::parse_task_id(id);  // throws ConfigError
    }
    return cfg;
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["algorithm"] = cfg.algorithm;
    j["adaptation"] = cfg.adaptation;
    j["taskSet"] = cfg.task_set;
    j["tasks"] = cfg.tasks;
    j["seed"] = cfg.seed;
    j["outDir"] = cfg.out_dir;
    j["stopAfterTasks"] = cfg.stop_after_tasks;
    j["schedule"] = {{"structureUpdates", cfg.schedule.structure_updates},
                     {"adaptationFrequency", cfg.schedule.adaptation_frequency},
                     {"componentUpdates", cfg.schedule.component_updates}};
    j["supervised"] = {{"model", cfg.supervised.model},
                       {"d", cfg.supervised.d},
                       {"kTrue", cfg.supervised.k_true},
                       {"k", cfg.supervised.k},
                       {"tasks", cfg.supervised.tasks},
                       {"samplesPerTask", cfg.supervised.samples_per_task},
                       {"noiseStd", cfg.supervised.noise_std},
                       {"initTasks", cfg.supervised.init_tasks},
                       {"initEpochs", cfg.supervised.init_epochs},
                       {"hidden", cfg.supervised.hidden},
                       {"depth", cfg.supervised.depth},
                       {"minibatch", cfg.supervised.minibatch},
                       {"lr", cfg.supervised.lr},
                       {"ewcLambda", cfg.supervised.ewc_lambda},
                       {"replayPerTask", cfg.supervised.replay_per_task},
                       {"expansionTau", cfg.supervised.expansion_tau}};
    j["lpgFtw"] = {{"d", cfg.lpg.d},
                   {"kMax", cfg.lpg.k_max},
                   {"tasks", cfg.lpg.tasks},
                   {"horizon", cfg.lpg.horizon},
                   {"lambda", cfg.lpg.lambda},
                   {"mu", cfg.lpg.mu},
                   {"sigma", cfg.lpg.sigma},
                   {"episodesPerStep", cfg.lpg.episodes_per_step},
                   {"lr", cfg.lpg.lr},
                   {"delta", cfg.lpg.delta},
                   {"gamma", cfg.lpg.gamma},
                   {"base", cfg.lpg.base},
                   {"evalEpisodes", cfg.lpg.eval_episodes}};
    j["comprl"] = {{"hidden", cfg.comp.hidden},
                   {"replayCapacity", cfg.comp.replay_capacity},
                   {"explorationSteps", cfg.comp.exploration_steps},
                   {"selectMode", cfg.comp.select_mode},
                   {"curriculum", cfg.comp.curriculum},
                   {"evalEpisodes", cfg.comp.eval_episodes},
                   {"zeroShotTau", cfg.comp.zero_shot_tau},
                   {"zeroShotTasks", cfg.comp.zero_shot_tasks},
                   {"ppo",
                    {{"lr", cfg.comp.ppo.lr},
                     {"stepsPerUpdate", cfg.comp.ppo.steps_per_update},
                     {"minibatch", cfg.comp.ppo.minibatch},
                     {"epochs", cfg.comp.ppo.epochs},
                     {"gaeLambda", cfg.comp.ppo.gae_lambda},
                     {"gamma", cfg.comp.ppo.gamma},
                     {"entropyCoef", cfg.comp.ppo.entropy_coef},
                     {"clip", cfg.comp.ppo.clip}}},
                   {"bcq",
                    {{"tau", cfg.comp.bcq.tau},
                     {"lr", cfg.comp.bcq.lr},
                     {"minibatch", cfg.comp.bcq.minibatch},
                     {"targetSync", cfg.comp.bcq.target_sync},
                     {"gamma", cfg.comp.bcq.gamma}}}};
    j["nonstat"] = {{"weighting", cfg.nonstat.weighting},
                    {"changingLevels", cfg.nonstat.changing_levels}};
    j["perturbation"] = {{"kind", cfg.perturbation.kind},
                         {"shifts", cfg.perturbation.shifts},
                         {"degradedEffect", cfg.perturbation.degraded_effect},
                         {"degradeFrom", cfg.perturbation.degrade_from},
                         {"degradeTo", cfg.perturbation.degrade_to}};
    return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(std::move(root));
}

std::string config_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    json root = to_json(cfg);
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty() || !node->is_object() || !node->contains(part))
            throw ConfigError("unknown config key: " + key);
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    // typed literals first (numbers, booleans, arrays); bare words as strings
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
    cfg = from_json(std::move(root));
}

}  // namespace lcl::harness
