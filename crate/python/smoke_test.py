"""Quick end-to-end check of the flockrl extension module."""

import json
import math
import random
import sys
import tempfile

import flockrl


def main():
    cfg = flockrl.Config(n=64, world_width=30.0, world_height=30.0, sectors=16)
    env = flockrl.FlockEnv(cfg, seed=1)
    assert env.obs_dim == 16 + 1, env.obs_dim
    rng = random.Random(0)
    for _ in range(5):
        actions = [rng.uniform(-0.5, 0.5) for _ in range(env.num_agents * env.action_dim)]
        obs, rewards = env.step(actions)
        assert len(obs) == env.num_agents * env.obs_dim
        assert len(rewards) == env.num_agents
        assert all(0.0 <= v <= 1.0 for v in obs)
    positions, headings, speeds = env.state()
    assert all(0.0 <= x < 30.0 and 0.0 <= y < 30.0 for x, y in positions)
    print(f"flock: mean nn distance {env.mean_nearest_neighbor_distance():.3f}")

    tag = flockrl.TagEnv(flockrl.Config(environment="tag", n_runners=30, n_chasers=10), seed=2)
    bounds = tag.action_bounds()
    actions = [sum(b) / 2 for agent in bounds for b in agent]
    tag.step(actions)
    print(f"tag: {tag.roles().count('chaser')} chasers, {tag.touches} touches")

    model = flockrl.OpinionModel([0.0, 0.2, 0.9, 1.0], threshold=1.0, strength=0.5)
    before = model.spread()
    model.step(10)
    assert model.spread() < before
    print(f"opinion: spread {before:.3f} -> {model.spread():.3g}")

    adv, ret = flockrl.gae([1.0, 0.0, 1.0], [0.5, 0.5, 0.5, 0.0], 0.99, 0.95)
    assert all(math.isclose(a + 0.5, r) for a, r in zip(adv, ret))
    assert flockrl.flock_reward(0.1, 1.0, 1.0, 0.5, 10.0) == -1.0

    derived = flockrl.validate(flockrl.Config())
    assert "b=128" in derived, derived
    try:
        flockrl.Config(theta_max=4.0).validate()
    except ValueError as e:
        print(f"rejected bad config: {e}")
    else:
        sys.exit("theta_max=4 should be rejected")

    train_cfg = flockrl.Config(
        n=32, world_width=24.0, world_height=24.0, sectors=8,
        training_steps=2, rollout_steps=16, minibatch_size=64, hidden=16, workers=1,
    )
    with tempfile.TemporaryDirectory() as out:
        rows = flockrl.train(train_cfg, out)
        assert [r["training_step"] for r in rows] == [1, 2], rows
        with open(f"{out}/manifest.json") as f:
            assert json.load(f)["environment"] == "flock"
    print(f"train: final mean reward {rows[-1]['mean_reward']:.4f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
