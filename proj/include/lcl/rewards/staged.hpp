#pragma once

#include <string>
#include <vector>

namespace lcl::rewards {

// Staged manipulation rewards over pre-computed geometric features. Each
// objective evaluates a fixed ladder of stage formulas and pays the maximum;
// only the success stage reaches 1.

enum class Objective { PickAndPlace, Push, TrashCan, Shelf };

struct RewardFeatures {
    // distances / angles, all nonnegative
    double target_dist = 0.0;           // gripper to object
    double z_dist_target_height = 0.0;  // object to lifting height
    double goal_xy_dist = 0.0;          // object to goal, horizontal
    double z_dist_bin = 0.0;            // object to bin floor, vertical
    double y_axis_orientation = 0.0;    // gripper to horizontal alignment
    double y_dist_shelf = 0.0;          // object to shelf slot

    bool grasping = false;
    bool object_above_bin = false;
    bool object_above_can = false;
    bool object_in_bin = false;
    bool object_in_can = false;
    bool gripper_in_can = false;
    bool object_in_front_of_shelf = false;
    bool object_in_shelf = false;
    bool gripper_near_object = false;
    bool past_wall = false;
};

struct StageValue {
    std::string name;
    double value = 0.0;
};

const char* objective_name(Objective objective);
Objective parse_objective(const std::string& name);  // throws ConfigError

// All stage values in the objective's canonical order.
std::vector<StageValue> stage_trace(Objective objective, const RewardFeatures& f);

// max over the stage values.
double reward(Objective objective, const RewardFeatures& f);

}  // namespace lcl::rewards
