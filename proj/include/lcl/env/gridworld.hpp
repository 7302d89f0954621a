#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"

namespace lcl::env {

// Discrete 8x8 world. Every task drops a full column of one static object
// (with a single gap cell) across the room, scatters four colored targets,
// and asks the agent to reach one color under one of four permutations of
// the action ordering. 64 tasks = 4 dynamics x 4 objects x 4 colors.

inline constexpr int kGridSize = 8;
inline constexpr int kGridHorizon = 64;
inline constexpr int kViewSize = 7;
inline constexpr int kObsChannels = 7;  // wall, floor, food, lava, door, target, agent
inline constexpr int kObsCells = kViewSize * kViewSize;
inline constexpr int kObsDim = kObsChannels * kObsCells;
inline constexpr int kNumActions = 6;
inline constexpr int kNumColors = 4;

enum class StaticObject : int { Wall = 0, Floor = 1, Food = 2, Lava = 3 };

// Canonical action effects; the task's dynamics decide which index maps to
// which effect.
enum class Effect : int {
    TurnLeft = 0,
    TurnRight = 1,
    MoveForward = 2,
    PickObject = 3,
    DropObject = 4,
    OpenDoor = 5,
};

enum class CellType : std::uint8_t { Empty, Wall, Floor, Food, Lava, Door, Target };

struct GridTaskSpec {
    int dynamics = 0;                          // permutation id, 0..3
    StaticObject object = StaticObject::Wall;  // static column content
    int color = 1;                             // goal target color, 1..4
};

const char* static_object_name(StaticObject object);
std::string task_id(const GridTaskSpec& spec);        // "grid-p{d}-{object}-c{c}"
GridTaskSpec parse_task_id(const std::string& id);    // inverse; throws ConfigError
std::vector<GridTaskSpec> all_task_specs();           // all 64, dynamics-major

struct GridCell {
    CellType type = CellType::Empty;
    int color = 0;      // target color 1..4, 0 otherwise
    bool open = false;  // door state
};

struct GridState {
    std::array<GridCell, kGridSize * kGridSize> cells{};  // row-major [y][x]
    int agent_x = 0;
    int agent_y = 0;
    int orientation = 0;  // 0 right, 1 down, 2 left, 3 up
    int i = 0;            // steps taken this episode
    bool done = false;
    bool door_open = false;
    std::vector<std::pair<int, int>> picked_food;

    GridCell& at(int x, int y) { return cells[static_cast<std::size_t>(y) * kGridSize + x]; }
    const GridCell& at(int x, int y) const {
        return cells[static_cast<std::size_t>(y) * kGridSize + x];
    }
};

// Egocentric 7x7x7 tensor, channel-major: data[c*49 + row*7 + col]. The agent
// sits at row 6, col 3 facing up in view coordinates.
struct GridObs {
    std::array<double, kObsDim> data{};

    double& at(int channel, int row, int col) {
        return data[static_cast<std::size_t>(channel) * kObsCells + row * kViewSize + col];
    }
    double at(int channel, int row, int col) const {
        return data[static_cast<std::size_t>(channel) * kObsCells + row * kViewSize + col];
    }
};

struct GridSlices {
    Vector statics;  // channels wall,floor,food,lava,door flattened (245)
    Vector target;   // target channel (49)
    Vector agent;    // agent channel (49)
};

struct GridStepResult {
    double reward = 0.0;
    bool done = false;
};

// Terminal reward for reaching the goal target at step count i.
double terminal_reward(int i);

// Effect executed by action index 0..5 under dynamics 0..3.
Effect permuted_effect(int dynamics, int action);

GridState reset(const GridTaskSpec& spec, Rng& rng);
GridStepResult step(GridState& state, const GridTaskSpec& spec, int action);
// Advances the episode clock without applying any action effect; used by
// wrappers that model failed action execution.
GridStepResult step_skip(GridState& state);
GridObs observe(const GridState& state, const GridTaskSpec& spec);
GridSlices state_slices(const GridObs& obs);

// Single-owner convenience wrapper pairing a spec with its live state.
struct GridEnv {
    GridTaskSpec spec;
    GridState state;

    explicit GridEnv(const GridTaskSpec& s) : spec(s) {}
    GridObs reset(Rng& rng) {
        state = env::reset(spec, rng);
        return observe();
    }
    GridStepResult step(int action) { return env::step(state, spec, action); }
    GridObs observe() const { return env::observe(state, spec); }
};

}  // namespace lcl::env
