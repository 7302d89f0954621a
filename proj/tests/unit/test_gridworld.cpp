#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>

#include "lcl/core/errors.hpp"
#include "lcl/env/gridworld.hpp"
#include "oracles/grid_bfs.hpp"

using namespace lcl;
using namespace lcl::env;

namespace {

bool same_state(const GridState& a, const GridState& b) {
    if (a.agent_x != b.agent_x || a.agent_y != b.agent_y) return false;
    if (a.orientation != b.orientation || a.i != b.i) return false;
    if (a.done != b.done || a.door_open != b.door_open) return false;
    if (a.picked_food != b.picked_food) return false;
    for (std::size_t c = 0; c < a.cells.size(); ++c)
        if (a.cells[c].type != b.cells[c].type || a.cells[c].color != b.cells[c].color ||
            a.cells[c].open != b.cells[c].open)
            return false;
    return true;
}

// Boundary-walled room with empty interior and a hand-placed agent.
GridState blank_room(int ax, int ay, int orientation) {
    GridState st;
    for (int y = 0; y < kGridSize; ++y)
        for (int x = 0; x < kGridSize; ++x)
            if (x == 0 || x == kGridSize - 1 || y == 0 || y == kGridSize - 1)
                st.at(x, y) = GridCell{CellType::Wall, 0, false};
    st.agent_x = ax;
    st.agent_y = ay;
    st.orientation = orientation;
    return st;
}

int count_cells(const GridState& st, CellType type) {
    int n = 0;
    for (const auto& cell : st.cells) n += cell.type == type ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("task ids cover all 64 specs and round-trip") {
    const auto specs = all_task_specs();
    REQUIRE(specs.size() == 64);
    std::set<std::string> ids;
    for (const auto& spec : specs) {
        ids.insert(task_id(spec));
        const GridTaskSpec back = parse_task_id(task_id(spec));
        CHECK(back.dynamics == spec.dynamics);
        CHECK(back.object == spec.object);
        CHECK(back.color == spec.color);
    }
    CHECK(ids.size() == 64);
    CHECK(task_id(GridTaskSpec{2, StaticObject::Food, 3}) == "grid-p2-food-c3");
    CHECK(task_id(GridTaskSpec{0, StaticObject::Wall, 1}) == "grid-p0-wall-c1");
    CHECK_THROWS_AS(parse_task_id("grid-p4-wall-c1"), ConfigError);
    CHECK_THROWS_AS(parse_task_id("nonsense"), ConfigError);
}

TEST_CASE("permutation tables are bijections with the pinned orderings") {
    const Effect p0[6] = {Effect::TurnLeft,   Effect::TurnRight,  Effect::MoveForward,
                          Effect::PickObject, Effect::DropObject, Effect::OpenDoor};
    for (int a = 0; a < 6; ++a) CHECK(permuted_effect(0, a) == p0[a]);
    CHECK(permuted_effect(1, 2) == Effect::OpenDoor);
    CHECK(permuted_effect(1, 5) == Effect::MoveForward);
    CHECK(permuted_effect(2, 1) == Effect::MoveForward);
    CHECK(permuted_effect(2, 2) == Effect::TurnRight);
    CHECK(permuted_effect(3, 1) == Effect::MoveForward);
    CHECK(permuted_effect(3, 2) == Effect::OpenDoor);
    CHECK(permuted_effect(3, 5) == Effect::TurnRight);
    for (int dyn = 0; dyn < 4; ++dyn) {
        // Fixed actions stay fixed; the six effects are hit exactly once each.
        CHECK(permuted_effect(dyn, 0) == Effect::TurnLeft);
        CHECK(permuted_effect(dyn, 3) == Effect::PickObject);
        CHECK(permuted_effect(dyn, 4) == Effect::DropObject);
        std::set<Effect> effects;
        for (int a = 0; a < 6; ++a) effects.insert(permuted_effect(dyn, a));
        CHECK(effects.size() == 6);
    }
    CHECK_THROWS_AS(permuted_effect(0, 6), InvalidAction);
    CHECK_THROWS_AS(permuted_effect(0, -1), InvalidAction);
    CHECK_THROWS_AS(permuted_effect(4, 0), InvalidConfig);
}

TEST_CASE("terminal reward formula spot values") {
    CHECK(terminal_reward(0) == 1.0);
    CHECK(std::abs(terminal_reward(64) - 0.1) < 1e-15);
    CHECK(std::abs(terminal_reward(31) - 0.5640625) < 1e-15);
}

TEST_CASE("reset builds a lawful layout for every object type") {
    for (StaticObject object :
         {StaticObject::Wall, StaticObject::Floor, StaticObject::Food, StaticObject::Lava}) {
        const GridTaskSpec spec{0, object, 1};
        const CellType column_type = object == StaticObject::Wall ? CellType::Wall
                                     : object == StaticObject::Floor
                                         ? CellType::Floor
                                         : object == StaticObject::Food ? CellType::Food
                                                                        : CellType::Lava;
        for (std::uint64_t seed = 0; seed < 250; ++seed) {
            Rng rng(seed);
            const GridState st = reset(spec, rng);

            CHECK(st.i == 0);
            CHECK_FALSE(st.done);
            CHECK_FALSE(st.door_open);
            CHECK(st.picked_food.empty());
            for (int x = 0; x < kGridSize; ++x) {
                CHECK(st.at(x, 0).type == CellType::Wall);
                CHECK(st.at(x, kGridSize - 1).type == CellType::Wall);
                CHECK(st.at(0, x).type == CellType::Wall);
                CHECK(st.at(kGridSize - 1, x).type == CellType::Wall);
            }

            // Locate the static column via the door (wall tasks) or the five
            // same-typed interior cells sharing one x.
            int column_x = -1;
            for (int x = 2; x <= kGridSize - 2; ++x) {
                int occupied = 0;
                for (int y = 1; y < kGridSize - 1; ++y) {
                    const CellType t = st.at(x, y).type;
                    if (t == column_type || t == CellType::Door) ++occupied;
                }
                if (occupied >= 5) column_x = x;
            }
            REQUIRE(column_x >= 2);
            int gap_y = -1;
            int statics = 0;
            for (int y = 1; y < kGridSize - 1; ++y) {
                if (st.at(column_x, y).type == column_type) {
                    ++statics;
                } else if (object == StaticObject::Wall) {
                    CHECK(st.at(column_x, y).type == CellType::Door);
                    CHECK_FALSE(st.at(column_x, y).open);
                    gap_y = y;
                } else {
                    gap_y = y;
                }
            }
            CHECK(statics == 5);
            REQUIRE(gap_y >= 1);

            if (object == StaticObject::Wall) {
                CHECK(count_cells(st, CellType::Door) == 1);
            } else {
                CHECK(count_cells(st, CellType::Door) == 0);
            }

            std::set<int> colors;
            for (const auto& cell : st.cells)
                if (cell.type == CellType::Target) colors.insert(cell.color);
            CHECK(count_cells(st, CellType::Target) == 4);
            CHECK(colors == std::set<int>{1, 2, 3, 4});

            // Agent on an empty interior cell, never inside the column except
            // at the gap.
            CHECK(st.agent_x >= 1);
            CHECK(st.agent_x <= kGridSize - 2);
            CHECK(st.agent_y >= 1);
            CHECK(st.agent_y <= kGridSize - 2);
            CHECK(st.at(st.agent_x, st.agent_y).type == CellType::Empty);
            if (st.agent_x == column_x) CHECK(st.agent_y == gap_y);
            CHECK(st.orientation >= 0);
            CHECK(st.orientation <= 3);
        }
    }
}

TEST_CASE("reset is seed-deterministic and ignores dynamics and color") {
    Rng a(42);
    Rng b(42);
    const GridState sa = reset(GridTaskSpec{0, StaticObject::Food, 1}, a);
    const GridState sb = reset(GridTaskSpec{0, StaticObject::Food, 1}, b);
    CHECK(same_state(sa, sb));

    Rng c(42);
    const GridState sc = reset(GridTaskSpec{3, StaticObject::Food, 4}, c);
    CHECK(same_state(sa, sc));

    Rng d(43);
    const GridState sd = reset(GridTaskSpec{0, StaticObject::Food, 1}, d);
    CHECK_FALSE(same_state(sa, sd));
}

TEST_CASE("movement, turning, and door mechanics") {
    const GridTaskSpec spec{0, StaticObject::Wall, 1};

    // Turns permute orientation right->down->left->up.
    GridState st = blank_room(3, 3, 0);
    step(st, spec, 1);
    CHECK(st.orientation == 1);
    step(st, spec, 1);
    CHECK(st.orientation == 2);
    step(st, spec, 0);
    CHECK(st.orientation == 1);

    // Forward into a free cell advances with zero reward.
    st = blank_room(3, 3, 0);
    auto res = step(st, spec, 2);
    CHECK(st.agent_x == 4);
    CHECK(st.agent_y == 3);
    CHECK(res.reward == 0.0);
    CHECK_FALSE(res.done);
    CHECK(st.i == 1);

    // Forward into a wall is a no-op move.
    st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Wall, 0, false};
    res = step(st, spec, 2);
    CHECK(st.agent_x == 3);
    CHECK(res.reward == 0.0);
    CHECK_FALSE(res.done);

    // Closed doors block until opened; open_door on anything else no-ops.
    st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Door, 0, false};
    step(st, spec, 2);
    CHECK(st.agent_x == 3);
    step(st, spec, 5);
    CHECK(st.at(4, 3).open);
    CHECK(st.door_open);
    step(st, spec, 2);
    CHECK(st.agent_x == 4);
    res = step(st, spec, 5);
    CHECK(res.reward == 0.0);

    // Permutation 1 swaps move_forward and open_door.
    st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Door, 0, false};
    const GridTaskSpec p1{1, StaticObject::Wall, 1};
    step(st, p1, 2);
    CHECK(st.at(4, 3).open);
    step(st, p1, 5);
    CHECK(st.agent_x == 4);
}

TEST_CASE("food, lava, and target rewards") {
    const GridTaskSpec spec{0, StaticObject::Food, 2};

    GridState st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Food, 0, false};
    auto res = step(st, spec, 3);
    CHECK(res.reward == 0.05);
    CHECK(st.at(4, 3).type == CellType::Empty);
    REQUIRE(st.picked_food.size() == 1);
    CHECK(st.picked_food[0] == std::pair<int, int>{4, 3});
    res = step(st, spec, 3);
    CHECK(res.reward == 0.0);

    // drop_object never does anything.
    st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Food, 0, false};
    res = step(st, spec, 4);
    CHECK(res.reward == 0.0);
    CHECK(st.at(4, 3).type == CellType::Food);

    // Walking onto lava costs 0.05 and ends the episode.
    st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Lava, 0, false};
    res = step(st, spec, 2);
    CHECK(res.reward == -0.05);
    CHECK(res.done);
    CHECK(st.agent_x == 4);

    // Wrong-color targets are inert and walkable.
    st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Target, 1, false};
    res = step(st, spec, 2);
    CHECK(res.reward == 0.0);
    CHECK_FALSE(res.done);
    CHECK(st.agent_x == 4);

    // Reaching the goal color at step 31 pays 1 - 0.9*31/64.
    st = blank_room(3, 3, 0);
    st.at(4, 3) = GridCell{CellType::Target, 2, false};
    st.i = 30;
    res = step(st, spec, 2);
    CHECK(res.done);
    CHECK(std::abs(res.reward - 0.5640625) < 1e-15);

    CHECK_THROWS_AS(step(st, spec, 2), SteppedAfterDone);
    GridState live = blank_room(3, 3, 0);
    CHECK_THROWS_AS(step(live, spec, 6), InvalidAction);
    CHECK_THROWS_AS(step(live, spec, -1), InvalidAction);
}

TEST_CASE("episodes cap at 64 steps") {
    const GridTaskSpec spec{0, StaticObject::Floor, 1};
    GridState st = blank_room(3, 3, 0);
    for (int k = 0; k < kGridHorizon - 1; ++k) {
        auto res = step(st, spec, 0);
        CHECK_FALSE(res.done);
    }
    auto res = step(st, spec, 0);
    CHECK(res.done);
    CHECK(res.reward == 0.0);
    CHECK(st.i == kGridHorizon);
}

TEST_CASE("observation slices and agent marker") {
    GridObs zero;
    const GridSlices zs = state_slices(zero);
    REQUIRE(zs.statics.size() == 245);
    REQUIRE(zs.target.size() == 49);
    REQUIRE(zs.agent.size() == 49);
    for (double v : zs.statics) CHECK(v == 0.0);
    for (double v : zs.target) CHECK(v == 0.0);
    for (double v : zs.agent) CHECK(v == 0.0);

    const GridTaskSpec spec{0, StaticObject::Floor, 1};
    GridState st = blank_room(3, 4, 3);
    const GridObs obs = observe(st, spec);

    // Slice concatenation reassembles the full tensor.
    const GridSlices sl = state_slices(obs);
    for (int k = 0; k < 245; ++k) CHECK(sl.statics[k] == obs.data[k]);
    for (int k = 0; k < 49; ++k) CHECK(sl.target[k] == obs.data[245 + k]);
    for (int k = 0; k < 49; ++k) CHECK(sl.agent[k] == obs.data[294 + k]);

    // Agent channel: a single in-view orientation constant at bottom-center.
    for (int row = 0; row < kViewSize; ++row)
        for (int col = 0; col < kViewSize; ++col)
            CHECK(obs.at(6, row, col) == (row == 6 && col == 3 ? 4.0 : 0.0));
}

TEST_CASE("observation is egocentric") {
    const GridTaskSpec spec{0, StaticObject::Food, 1};
    GridState st = blank_room(3, 4, 3);
    st.at(3, 2) = GridCell{CellType::Food, 0, false};
    st.at(5, 4) = GridCell{CellType::Target, 3, false};

    st.orientation = 3;  // up: food two ahead, target two to the right
    GridObs obs = observe(st, spec);
    CHECK(obs.at(2, 4, 3) == 1.0);
    CHECK(obs.at(5, 6, 5) == 3.0);

    st.orientation = 0;  // right: food two to the left, target two ahead
    obs = observe(st, spec);
    CHECK(obs.at(2, 6, 1) == 1.0);
    CHECK(obs.at(5, 4, 3) == 3.0);

    st.orientation = 1;  // down: food behind (invisible), target to the left
    obs = observe(st, spec);
    for (int k = 0; k < 49; ++k) CHECK(obs.data[2 * 49 + k] == 0.0);
    CHECK(obs.at(5, 6, 1) == 3.0);

    st.orientation = 2;  // left: food two to the right, target behind
    obs = observe(st, spec);
    CHECK(obs.at(2, 6, 5) == 1.0);
    for (int k = 0; k < 49; ++k) CHECK(obs.data[5 * 49 + k] == 0.0);
}

TEST_CASE("walls and closed doors occlude; open doors reveal") {
    const GridTaskSpec spec{0, StaticObject::Wall, 1};
    GridState st = blank_room(2, 3, 0);
    for (int y = 1; y < kGridSize - 1; ++y) st.at(3, y) = GridCell{CellType::Wall, 0, false};

    GridObs obs = observe(st, spec);
    for (int col = 0; col < kViewSize; ++col) CHECK(obs.at(0, 5, col) == 1.0);
    for (int row = 0; row < 5; ++row)
        for (int col = 0; col < kViewSize; ++col)
            for (int c = 0; c < kObsChannels; ++c) CHECK(obs.at(c, row, col) == 0.0);

    // A closed door in the wall line shows in the door channel but still
    // occludes; opening it clears the channel and reveals what is behind.
    st.at(3, 3) = GridCell{CellType::Door, 0, false};
    st.at(4, 3) = GridCell{CellType::Food, 0, false};
    obs = observe(st, spec);
    CHECK(obs.at(4, 5, 3) == 1.0);
    CHECK(obs.at(0, 5, 3) == 0.0);
    CHECK(obs.at(2, 4, 3) == 0.0);

    st.at(3, 3).open = true;
    obs = observe(st, spec);
    CHECK(obs.at(4, 5, 3) == 0.0);
    CHECK(obs.at(2, 4, 3) == 1.0);
}

TEST_CASE("cells beyond the world boundary stay dark") {
    const GridTaskSpec spec{0, StaticObject::Floor, 1};
    GridState st = blank_room(1, 3, 3);  // facing up, hugging the west wall
    const GridObs obs = observe(st, spec);
    for (int row = 0; row < kViewSize; ++row)
        for (int col = 0; col < 2; ++col)
            for (int c = 0; c < kObsChannels; ++c) CHECK(obs.at(c, row, col) == 0.0);
    CHECK(obs.at(0, 6, 2) == 1.0);  // the west wall itself is visible
}

TEST_CASE("transitions and observations are deterministic under fuzz") {
    for (StaticObject object : {StaticObject::Wall, StaticObject::Lava}) {
        const GridTaskSpec spec{1, object, 2};
        Rng reset_rng(7001);
        Rng action_rng(7002);
        GridState a = reset(spec, reset_rng);
        GridState b = a;
        double episode_reward = 0.0;
        int food_at_start = count_cells(a, CellType::Food);
        for (int k = 0; k < 20000; ++k) {
            const int action = static_cast<int>(action_rng.uniform_index(kNumActions));
            const auto ra = step(a, spec, action);
            const auto rb = step(b, spec, action);
            REQUIRE(ra.reward == rb.reward);
            REQUIRE(ra.done == rb.done);
            REQUIRE(same_state(a, b));
            episode_reward += ra.reward;
            REQUIRE(a.i <= kGridHorizon);
            REQUIRE(episode_reward >= -0.05);
            REQUIRE(episode_reward <= 1.0 + 0.05 * food_at_start);
            if (k % 500 == 0) {
                const GridObs oa = observe(a, spec);
                const GridObs ob = observe(b, spec);
                REQUIRE(oa.data == ob.data);
            }
            if (ra.done) {
                a = reset(spec, reset_rng);
                b = a;
                episode_reward = 0.0;
                food_at_start = count_cells(a, CellType::Food);
            }
        }
    }
}

TEST_CASE("shortest-path oracle solves every task") {
    for (const auto& spec : all_task_specs()) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            GridEnv env(spec);
            Rng rng(9000 + seed);
            env.reset(rng);
            const auto plan = oracles::grid_bfs_plan(env.state, spec);
            REQUIRE(plan.has_value());
            REQUIRE(plan->size() <= 40);
            double last = 0.0;
            bool done = false;
            for (const Effect effect : *plan) {
                REQUIRE_FALSE(done);
                const int action = oracles::action_for_effect(spec.dynamics, effect);
                REQUIRE(action >= 0);
                const auto res = env.step(action);
                last = res.reward;
                done = res.done;
            }
            CHECK(done);
            CHECK(last >= 0.1);
            const double expected = terminal_reward(static_cast<int>(plan->size()));
            CHECK(std::abs(last - expected) < 1e-15);
        }
    }
}

TEST_CASE("grid env wrapper mirrors the free functions") {
    const GridTaskSpec spec{2, StaticObject::Food, 3};
    GridEnv env(spec);
    Rng rng(31);
    const GridObs first = env.reset(rng);
    Rng rng2(31);
    const GridState direct = reset(spec, rng2);
    CHECK(same_state(env.state, direct));
    CHECK(first.data == observe(direct, spec).data);
    const auto res = env.step(0);
    CHECK_FALSE(res.done);
    CHECK(env.state.i == 1);
}
