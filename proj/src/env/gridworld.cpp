#include "lcl/env/gridworld.hpp"

#include <algorithm>

#include "lcl/core/errors.hpp"

namespace lcl::env {
namespace {

constexpr int kDx[4] = {1, 0, -1, 0};  // right, down, left, up
constexpr int kDy[4] = {0, 1, 0, -1};

constexpr Effect kPermutations[4][kNumActions] = {
    {Effect::TurnLeft, Effect::TurnRight, Effect::MoveForward, Effect::PickObject,
     Effect::DropObject, Effect::OpenDoor},
    {Effect::TurnLeft, Effect::TurnRight, Effect::OpenDoor, Effect::PickObject,
     Effect::DropObject, Effect::MoveForward},
    {Effect::TurnLeft, Effect::MoveForward, Effect::TurnRight, Effect::PickObject,
     Effect::DropObject, Effect::OpenDoor},
    {Effect::TurnLeft, Effect::MoveForward, Effect::OpenDoor, Effect::PickObject,
     Effect::DropObject, Effect::TurnRight},
};

CellType static_cell_type(StaticObject object) {
    switch (object) {
        case StaticObject::Wall: return CellType::Wall;
        case StaticObject::Floor: return CellType::Floor;
        case StaticObject::Food: return CellType::Food;
        case StaticObject::Lava: return CellType::Lava;
    }
    throw InvalidConfig("unknown static object");
}

bool blocks_movement(const GridCell& cell) {
    return cell.type == CellType::Wall || (cell.type == CellType::Door && !cell.open);
}

// Sight passes through everything except walls and closed doors.
bool blocks_sight(const GridCell& cell) { return blocks_movement(cell); }

}  // namespace

const char* static_object_name(StaticObject object) {
    switch (object) {
        case StaticObject::Wall: return "wall";
        case StaticObject::Floor: return "floor";
        case StaticObject::Food: return "food";
        case StaticObject::Lava: return "lava";
    }
    throw InvalidConfig("unknown static object");
}

std::string task_id(const GridTaskSpec& spec) {
    return "grid-p" + std::to_string(spec.dynamics) + "-" + static_object_name(spec.object) +
           "-c" + std::to_string(spec.color);
}

GridTaskSpec parse_task_id(const std::string& id) {
    for (int dyn = 0; dyn < 4; ++dyn) {
        for (StaticObject object :
             {StaticObject::Wall, StaticObject::Floor, StaticObject::Food, StaticObject::Lava}) {
            for (int color = 1; color <= kNumColors; ++color) {
                GridTaskSpec spec{dyn, object, color};
                if (task_id(spec) == id) return spec;
            }
        }
    }
    throw ConfigError("unknown grid task id: " + id);
}

std::vector<GridTaskSpec> all_task_specs() {
    std::vector<GridTaskSpec> specs;
    specs.reserve(64);
    for (int dyn = 0; dyn < 4; ++dyn)
        for (StaticObject object :
             {StaticObject::Wall, StaticObject::Floor, StaticObject::Food, StaticObject::Lava})
            for (int color = 1; color <= kNumColors; ++color)
                specs.push_back(GridTaskSpec{dyn, object, color});
    return specs;
}

double terminal_reward(int i) {
    return 1.0 - 0.9 * (static_cast<double>(i) / kGridHorizon);
}

Effect permuted_effect(int dynamics, int action) {
    if (dynamics < 0 || dynamics >= 4) throw InvalidConfig("dynamics id out of range");
    if (action < 0 || action >= kNumActions) throw InvalidAction("action index out of range");
    return kPermutations[dynamics][action];
}

GridState reset(const GridTaskSpec& spec, Rng& rng) {
    GridState state;
    for (int y = 0; y < kGridSize; ++y)
        for (int x = 0; x < kGridSize; ++x)
            if (x == 0 || x == kGridSize - 1 || y == 0 || y == kGridSize - 1)
                state.at(x, y) = GridCell{CellType::Wall, 0, false};

    // Static column with a single gap; the gap holds a closed door for wall
    // tasks and stays empty otherwise.
    const int column_x = rng.uniform_int(2, kGridSize - 2);
    const int gap_y = rng.uniform_int(1, kGridSize - 2);
    for (int y = 1; y < kGridSize - 1; ++y) {
        if (y == gap_y) continue;
        state.at(column_x, y) = GridCell{static_cell_type(spec.object), 0, false};
    }
    if (spec.object == StaticObject::Wall)
        state.at(column_x, gap_y) = GridCell{CellType::Door, 0, false};

    std::vector<std::pair<int, int>> free_cells;
    for (int y = 1; y < kGridSize - 1; ++y)
        for (int x = 1; x < kGridSize - 1; ++x)
            if (state.at(x, y).type == CellType::Empty) free_cells.emplace_back(x, y);

    const std::size_t agent_slot = rng.uniform_index(free_cells.size());
    state.agent_x = free_cells[agent_slot].first;
    state.agent_y = free_cells[agent_slot].second;
    free_cells.erase(free_cells.begin() + static_cast<std::ptrdiff_t>(agent_slot));
    state.orientation = static_cast<int>(rng.uniform_index(4));

    for (int color = 1; color <= kNumColors; ++color) {
        const std::size_t slot = rng.uniform_index(free_cells.size());
        auto [x, y] = free_cells[slot];
        state.at(x, y) = GridCell{CellType::Target, color, false};
        free_cells.erase(free_cells.begin() + static_cast<std::ptrdiff_t>(slot));
    }
    return state;
}

GridStepResult step(GridState& state, const GridTaskSpec& spec, int action) {
    if (action < 0 || action >= kNumActions) throw InvalidAction("action index out of range");
    if (state.done) throw SteppedAfterDone("episode already terminated");

    state.i += 1;
    double reward = 0.0;
    const int front_x = state.agent_x + kDx[state.orientation];
    const int front_y = state.agent_y + kDy[state.orientation];

    switch (permuted_effect(spec.dynamics, action)) {
        case Effect::TurnLeft:
            state.orientation = (state.orientation + 3) % 4;
            break;
        case Effect::TurnRight:
            state.orientation = (state.orientation + 1) % 4;
            break;
        case Effect::MoveForward: {
            const GridCell& front = state.at(front_x, front_y);
            if (!blocks_movement(front)) {
                state.agent_x = front_x;
                state.agent_y = front_y;
                if (front.type == CellType::Lava) {
                    reward -= 0.05;
                    state.done = true;
                } else if (front.type == CellType::Target && front.color == spec.color) {
                    reward += terminal_reward(state.i);
                    state.done = true;
                }
            }
            break;
        }
        case Effect::PickObject: {
            GridCell& front = state.at(front_x, front_y);
            if (front.type == CellType::Food) {
                front = GridCell{};
                state.picked_food.emplace_back(front_x, front_y);
                reward += 0.05;
            }
            break;
        }
        case Effect::DropObject:
            // Food is consumed on pickup, so the agent never carries anything.
            break;
        case Effect::OpenDoor: {
            GridCell& front = state.at(front_x, front_y);
            if (front.type == CellType::Door && !front.open) {
                front.open = true;
                state.door_open = true;
            }
            break;
        }
    }

    if (state.i >= kGridHorizon) state.done = true;
    return {reward, state.done};
}

GridStepResult step_skip(GridState& state) {
    if (state.done) throw SteppedAfterDone("episode already terminated");
    state.i += 1;
    if (state.i >= kGridHorizon) state.done = true;
    return {0.0, state.done};
}

GridObs observe(const GridState& state, const GridTaskSpec&) {
    // Map view cell (row, col) to the world: forward (6 - row) cells, right
    // (col - 3) cells, where "right" is forward rotated clockwise.
    const int fx = kDx[state.orientation];
    const int fy = kDy[state.orientation];
    const int rx = -fy;
    const int ry = fx;

    std::array<const GridCell*, kObsCells> cell{};
    for (int row = 0; row < kViewSize; ++row) {
        for (int col = 0; col < kViewSize; ++col) {
            const int wx = state.agent_x + fx * (kViewSize - 1 - row) + rx * (col - 3);
            const int wy = state.agent_y + fy * (kViewSize - 1 - row) + ry * (col - 3);
            if (wx >= 0 && wx < kGridSize && wy >= 0 && wy < kGridSize)
                cell[row * kViewSize + col] = &state.at(wx, wy);
        }
    }

    // Visibility: iterative flood propagation from the agent's view cell,
    // sweeping rows bottom-to-top; opaque cells are visible but propagate no
    // further, and out-of-grid cells never propagate.
    std::array<bool, kObsCells> visible{};
    visible[6 * kViewSize + 3] = true;
    auto propagates = [&](int row, int col) {
        const GridCell* c = cell[row * kViewSize + col];
        return c != nullptr && !blocks_sight(*c);
    };
    for (int row = kViewSize - 1; row >= 0; --row) {
        for (int col = 0; col < kViewSize - 1; ++col) {
            if (!visible[row * kViewSize + col] || !propagates(row, col)) continue;
            visible[row * kViewSize + col + 1] = true;
            if (row > 0) {
                visible[(row - 1) * kViewSize + col + 1] = true;
                visible[(row - 1) * kViewSize + col] = true;
            }
        }
        for (int col = kViewSize - 1; col >= 1; --col) {
            if (!visible[row * kViewSize + col] || !propagates(row, col)) continue;
            visible[row * kViewSize + col - 1] = true;
            if (row > 0) {
                visible[(row - 1) * kViewSize + col - 1] = true;
                visible[(row - 1) * kViewSize + col] = true;
            }
        }
    }

    GridObs obs;
    for (int row = 0; row < kViewSize; ++row) {
        for (int col = 0; col < kViewSize; ++col) {
            if (!visible[row * kViewSize + col]) continue;
            const GridCell* c = cell[row * kViewSize + col];
            if (c == nullptr) continue;
            switch (c->type) {
                case CellType::Empty: break;
                case CellType::Wall: obs.at(0, row, col) = 1.0; break;
                case CellType::Floor: obs.at(1, row, col) = 1.0; break;
                case CellType::Food: obs.at(2, row, col) = 1.0; break;
                case CellType::Lava: obs.at(3, row, col) = 1.0; break;
                case CellType::Door:
                    if (!c->open) obs.at(4, row, col) = 1.0;
                    break;
                case CellType::Target:
                    obs.at(5, row, col) = static_cast<double>(c->color);
                    break;
            }
        }
    }
    // In view coordinates the agent always faces up; 4 is up's indicator in
    // the right/down/left/up -> 1..4 encoding.
    obs.at(6, kViewSize - 1, 3) = 4.0;
    return obs;
}

GridSlices state_slices(const GridObs& obs) {
    GridSlices slices;
    slices.statics.assign(obs.data.begin(), obs.data.begin() + 5 * kObsCells);
    slices.target.assign(obs.data.begin() + 5 * kObsCells, obs.data.begin() + 6 * kObsCells);
    slices.agent.assign(obs.data.begin() + 6 * kObsCells, obs.data.end());
    return slices;
}

}  // namespace lcl::env
