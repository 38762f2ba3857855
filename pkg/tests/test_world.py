import numpy as np
import pytest

from fruitmarket import world
from fruitmarket.exchange import APPLE, BANANA
from fruitmarket.rng import substream
from fruitmarket.world import MapSpec, generate_map


def gen(template="uniform", seed=0, **kw):
    return generate_map(MapSpec(template=template, **kw), substream(seed, "map"))


def test_unknown_template_is_an_error():
    with pytest.raises(ValueError, match="unknown map template"):
        gen(template="sideways")


def test_negative_multiplier_is_an_error():
    with pytest.raises(ValueError, match="non-negative"):
        gen(apple_multiplier=-1.0)


def test_generation_is_deterministic():
    a = gen(seed=42)
    b = gen(seed=42)
    assert np.array_equal(a.kind, b.kind)
    assert np.array_equal(a.tree_good, b.tree_good)
    c = gen(seed=43)
    assert not np.array_equal(a.kind, c.kind)


def test_all_trees_start_ripe():
    state = gen(seed=3)
    trees = state.kind == world.TREE
    assert trees.any()
    assert (state.ripe_at[trees] == 0).all()
    ys, xs = np.nonzero(trees)
    assert state.is_ripe(int(xs[0]), int(ys[0]), tick=0)


def test_no_entity_on_walls_or_water():
    for template in ("uniform", "walls", "thick-walls", "no-walls", "tiny"):
        for seed in range(5):
            state = gen(template=template, seed=seed, apple_multiplier=3.0)
            blocked = (state.kind == world.WALL) | (state.kind == world.WATER)
            assert not (blocked & (state.tree_good >= 0)).any()
            for x, y in state.spawn_points:
                assert state.kind[y, x] == world.EMPTY


def test_spawn_points_never_grow_trees():
    for seed in range(10):
        state = gen(seed=seed, apple_multiplier=5.0, banana_multiplier=5.0)
        for x, y in state.spawn_points:
            assert state.kind[y, x] == world.EMPTY


def test_uniform_template_has_ten_spawn_points():
    assert len(gen().spawn_points) == 10


def test_region_templates_reserve_center_blocks():
    state = gen(template="walls")
    assert len(state.regions) == 3
    for region in state.regions:
        spots = state.spawn_points_in_region(region.rid)
        assert len(spots) == 4
        spawnable = 0
        for y in range(region.y0, region.y1 + 1):
            for x in range(region.x0, region.x1 + 1):
                if state.kind[y, x] != world.WALL and not state.no_tree[y, x]:
                    spawnable += 1
        assert spawnable == 96


def test_spawn_rates_scale_with_multipliers():
    # 23x23 uniform interior: expect ~15% apples at a=1 and ~30% at a=2
    counts = {1.0: [], 2.0: []}
    for mult in counts:
        for seed in range(40):
            state = gen(seed=seed, apple_multiplier=mult)
            spawnable = (~state.no_tree) & (state.kind != world.WALL) & (
                state.kind != world.WATER)
            apples = (state.tree_good == APPLE).sum()
            counts[mult].append(apples / spawnable.sum())
    assert abs(np.mean(counts[1.0]) - 0.15) < 0.02
    assert abs(np.mean(counts[2.0]) - 0.30) < 0.03


def test_probabilities_renormalize_when_oversubscribed():
    # a=5 -> 75% apples, b=1 -> 15%: still well-defined, with no empties left
    # at a=6,b=2 (90% + 30% renormalized to 75% / 25%)
    state = gen(seed=1, apple_multiplier=6.0, banana_multiplier=2.0)
    spawnable = (~state.no_tree) & (state.kind != world.WALL) & (state.kind != world.WATER)
    trees = state.tree_good >= 0
    assert trees[spawnable].all()
    frac_apple = (state.tree_good[spawnable] == APPLE).mean()
    assert abs(frac_apple - 0.75) < 0.05


def test_neutral_region_mean_tree_count_matches_expectation():
    # 96 tiles x 0.30 total x 0.1 penalty = 2.88 expected trees
    rng = substream(99, "map")
    total = 0
    n = 3000
    for _ in range(n):
        state = generate_map(MapSpec(template="walls", neutral_penalty=0.1), rng)
        neutral = [r for r in state.regions if r.penalized][0]
        sl = state.tree_good[neutral.y0:neutral.y1 + 1, neutral.x0:neutral.x1 + 1]
        total += (sl >= 0).sum()
    mean = total / n
    assert abs(mean - 2.88) < 0.1


def test_walls_block_movement_but_sit_within_trade_range():
    state = gen(template="walls", seed=2)
    left, mid = state.regions[0], state.regions[1]
    reach = world.flood_reachable(state, state.spawn_points_in_region(0)[0])
    assert not any((mid.x0 <= x <= mid.x1 and mid.y0 <= y <= mid.y1) for x, y in reach)
    # adjacent columns across the 1-tile wall are 2 apart
    d = world.euclidean_distance((left.x1, 5), (mid.x0, 5))
    assert d <= 4


def test_thick_walls_put_regions_out_of_trade_range():
    state = gen(template="thick-walls", seed=2)
    left, mid = state.regions[0], state.regions[1]
    best = min(
        world.euclidean_distance((left.x1, y1), (mid.x0, y2))
        for y1 in range(left.y0, left.y1 + 1)
        for y2 in range(mid.y0, mid.y1 + 1)
    )
    assert best > 4
    reach = world.flood_reachable(state, state.spawn_points_in_region(0)[0])
    assert not any((mid.x0 <= x <= mid.x1) for x, y in reach)


def test_marketplace_placement_rules():
    state = gen(template="tiny", seed=0, apple_multiplier=0.0, banana_multiplier=0.0)
    world.place_marketplace(state, (5, 5), [(-3, 1), (1, -3)])
    assert state.kind[5, 5] == world.MARKET
    assert not state.passable(5, 5)
    with pytest.raises(ValueError):
        world.place_marketplace(state, (0, 0), [(-1, 1)])  # wall
    with pytest.raises(ValueError):
        world.place_marketplace(state, (4, 4), [(-1, 1)])  # spawn point


def test_harvest_and_regrow_timing():
    state = gen(seed=5)
    ys, xs = np.nonzero(state.kind == world.TREE)
    x, y = int(xs[0]), int(ys[0])
    world.harvest_tree(state, x, y, tick=100, ripen_time=50)
    assert not state.is_ripe(x, y, 149)
    assert state.is_ripe(x, y, 150)
    world.harvest_tree(state, x, y, tick=200, ripen_time=1)
    assert state.is_ripe(x, y, 201)


def test_dump_grid_round_trips_the_char_set():
    state = gen(template="tiny", seed=0)
    text = world.dump_grid(state)
    rows = text.splitlines()
    assert len(rows) == 11 and all(len(r) == 11 for r in rows)
    assert set("".join(rows)) <= set("#~.ABab*%M")


def test_dump_grid_shows_unripe_trees_lowercase():
    state = gen(template="tiny", seed=1, apple_multiplier=3.0)
    ys, xs = np.nonzero(state.tree_good == APPLE)
    x, y = int(xs[0]), int(ys[0])
    world.harvest_tree(state, x, y, tick=0, ripen_time=50)
    assert world.dump_grid(state, tick=10).splitlines()[y][x] == "a"
    assert world.dump_grid(state, tick=50).splitlines()[y][x] == "A"
