#include "lcl/rewards/staged.hpp"

#include <algorithm>
#include <cmath>

#include "lcl/core/errors.hpp"

namespace lcl::rewards {
namespace {

double ramp(double base, double coeff, double scale, double dist) {
    return base + coeff * (1.0 - std::tanh(scale * dist));
}

}  // namespace

const char* objective_name(Objective objective) {
    switch (objective) {
        case Objective::PickAndPlace: return "pick_and_place";
        case Objective::Push: return "push";
        case Objective::TrashCan: return "trash_can";
        case Objective::Shelf: return "shelf";
    }
    throw InvalidConfig("unknown objective");
}

Objective parse_objective(const std::string& name) {
    for (Objective objective : {Objective::PickAndPlace, Objective::Push, Objective::TrashCan,
                                Objective::Shelf})
        if (name == objective_name(objective)) return objective;
    throw ConfigError("unknown objective: " + name);
}

std::vector<StageValue> stage_trace(Objective objective, const RewardFeatures& f) {
    const double reach = 0.2 * (1.0 - std::tanh(10.0 * f.target_dist));
    switch (objective) {
        case Objective::PickAndPlace: {
            const bool grasp_on = f.grasping;
            const double grasp = grasp_on ? 0.3 : 0.0;
            const double lift = grasp_on ? ramp(0.3, 0.2, 5.0, f.z_dist_target_height) : 0.0;
            double approach = 0.0;
            if (lift > 0.45 && !f.object_above_bin)
                approach = lift + 0.2 * (1.0 - std::tanh(2.0 * f.goal_xy_dist));
            else if (lift > 0.45 && f.object_above_bin)
                approach = 0.5 + 0.2 * (1.0 - std::tanh(2.0 * f.goal_xy_dist));
            const double lower =
                f.object_above_bin && grasp_on ? ramp(0.7, 0.2, 5.0, f.z_dist_bin) : 0.0;
            const double success = f.object_in_bin && reach > 0.07 ? 1.0 : 0.0;
            return {{"reach", reach},       {"grasp", grasp}, {"lift", lift},
                    {"approach", approach}, {"lower", lower}, {"success", success}};
        }
        case Objective::Push: {
            const double grasp = f.grasping ? 0.3 : 0.0;
            const double approach = f.grasping ? ramp(0.3, 0.4, 5.0, f.goal_xy_dist) : 0.0;
            const double success = f.goal_xy_dist <= 0.03 ? 1.0 : 0.0;
            return {{"reach", reach},
                    {"grasp", grasp},
                    {"approach", approach},
                    {"success", success}};
        }
        case Objective::TrashCan: {
            const bool grasp_on = f.grasping && !f.object_in_can;
            const double grasp = grasp_on ? 0.3 : 0.0;
            const double lift = grasp_on ? ramp(0.3, 0.2, 5.0, f.z_dist_target_height) : 0.0;
            double approach = 0.0;
            if (lift > 0.45 && !f.object_above_can)
                approach = lift + 0.2 * (1.0 - std::tanh(2.0 * f.goal_xy_dist));
            else if (lift > 0.45 && f.object_above_can)
                approach = 0.5 + 0.2 * (1.0 - std::tanh(2.0 * f.goal_xy_dist));
            const double drop = f.object_above_can && !grasp_on ? 0.95 : 0.0;
            const double success = f.object_in_can && !f.gripper_in_can ? 1.0 : 0.0;
            return {{"reach", reach},       {"grasp", grasp}, {"lift", lift},
                    {"approach", approach}, {"drop", drop},   {"success", success}};
        }
        case Objective::Shelf: {
            const double grasp = f.grasping ? 0.3 : 0.0;
            const double lift = f.grasping ? ramp(0.3, 0.2, 5.0, f.z_dist_target_height) : 0.0;
            const double align = f.object_in_front_of_shelf
                                     ? ramp(0.5, 0.3, 1.0, f.y_axis_orientation)
                                     : 0.0;
            const double approach = f.object_in_front_of_shelf && align > 0.6
                                        ? ramp(0.8, 0.1, 5.0, f.y_dist_shelf)
                                        : 0.0;
            const double success = f.object_in_shelf ? 1.0 : 0.0;
            return {{"reach", reach}, {"grasp", grasp},       {"lift", lift},
                    {"align", align}, {"approach", approach}, {"success", success}};
        }
    }
    throw InvalidConfig("unknown objective");
}

double reward(Objective objective, const RewardFeatures& f) {
    double best = 0.0;
    for (const StageValue& stage : stage_trace(objective, f)) best = std::max(best, stage.value);
    return best;
}

}  // namespace lcl::rewards
