import math

import numpy as np
import pytest

from amrlab import amr, ddpg, envs, neural
from amrlab.errors import ContractError, NumericFault
from amrlab.replay import Batch, Transition

from conftest import small_hp


def _bias_genome(bias):
    g = np.zeros(amr.GENOME_LENGTH)
    g[-1] = bias
    return g


def _agent(rng, **kw):
    return ddpg.make_agent(envs.make_env("pendulum").spec, small_hp(**kw), rng)


def _transition(rng, terminal=False):
    return Transition(rng.normal(size=3), rng.uniform(-2, 2, size=1), float(rng.normal()),
                      rng.normal(size=3), terminal)


def test_genome_length_is_25():
    assert amr.GENOME_LENGTH == 25
    net = amr.genome_to_network(np.zeros(25))
    assert neural.flatten(net.net).size == 25


def test_zero_genome_outputs_zero(rng):
    net = amr.genome_to_network(np.zeros(25))
    for _ in range(5):
        assert net(rng.normal(size=4)) == 0.0


def test_bias_only_genome_adds_bias():
    net = amr.genome_to_network(_bias_genome(0.5))
    f = amr.AmrFeatures(0.3, 1.0, 0.2, 0.9)
    assert amr.augment(net, f, 1.0, 1.0) == 1.5


def test_beta_zero_is_identity(rng):
    net = amr.genome_to_network(amr.random_genome(rng))
    f = amr.AmrFeatures(0.3, -2.0, 0.2, 0.9)
    assert amr.augment(net, f, 0.0, -2.0) == -2.0


def test_augmentation_is_linear_in_beta(rng):
    net = amr.genome_to_network(amr.random_genome(rng))
    f = amr.AmrFeatures(*rng.uniform(0, 1, size=4))
    a = amr.augment(net, f, 1.0, 0.0)
    assert amr.augment(net, f, 2.5, 0.7) == pytest.approx(0.7 + 2.5 * a, abs=1e-14)


def test_forward_matches_hand_computation(rng):
    g = rng.uniform(-1, 1, size=25)
    x = rng.uniform(0, 1, size=4)
    W1, b1, W2, b2 = g[:16].reshape(4, 4), g[16:20], g[20:24], g[24]
    hidden = [math.tanh(sum(W1[i, j] * x[j] for j in range(4)) + b1[i]) for i in range(4)]
    expect = sum(W2[i] * hidden[i] for i in range(4)) + b2
    assert amr.genome_to_network(g)(x) == pytest.approx(expect, abs=1e-14)
    assert amr.genome_to_network(g, bounded=True)(x) == pytest.approx(math.tanh(expect), abs=1e-14)


def test_bounded_output_in_unit_interval(rng):
    net = amr.genome_to_network(rng.uniform(-50, 50, size=25), bounded=True)
    assert net.bounded
    for _ in range(20):
        assert -1.0 <= net(rng.normal(size=4) * 10) <= 1.0


def test_genome_round_trip(rng):
    g = amr.random_genome(rng)
    back = amr.network_to_genome(amr.genome_to_network(g))
    assert back.genes.tobytes() == g.genes.tobytes()


def test_random_genome_range(rng):
    g = amr.random_genome(rng, -1, 1)
    assert np.all(np.abs(g.genes) <= 1.0)


def test_genome_validation():
    with pytest.raises(ContractError):
        amr.Genome(np.zeros(24))
    with pytest.raises(ContractError):
        amr.Genome(np.full(25, np.nan))


def test_wrong_shape_network_rejected(rng):
    with pytest.raises(ContractError):
        amr.AmrNetwork(neural.init_network([4, 5, 1], ["tanh", "linear"], rng))


def test_features_match_batched_td_target(rng):
    agent = _agent(rng)
    for terminal in (False, True):
        t = _transition(rng, terminal)
        f = amr.features(agent, t)
        b = Batch(t.s[None], t.a[None], np.array([t.r]), t.s_next[None], np.array([float(terminal)]))
        y = ddpg.td_target(agent, b)[0]
        q = ddpg.q_value(agent.critic, t.s[None], t.a[None])[0]
        assert f.abs_td == pytest.approx(abs(y - q), rel=1e-12, abs=1e-14)
        assert f.reward == t.r


def test_features_zero_nets_give_zero_td(rng):
    agent = _agent(rng)
    for net in (agent.critic, agent.target_critic):
        net.flat[:] = 0.0
    f = amr.features(agent, _transition(rng)._replace(r=0.0))
    assert f.abs_td == 0.0


def test_features_constant_critic_cancels(rng):
    # Q == c everywhere: |r + gamma*c - c| with r = (1 - gamma) * c is zero
    agent = _agent(rng)
    c = 4.0
    for net in (agent.critic, agent.target_critic):
        net.flat[:] = 0.0
        net.layers[-1].biases[0] = c
    t = _transition(rng)._replace(r=(1 - agent.hp.gamma) * c)
    assert amr.features(agent, t).abs_td == pytest.approx(0.0, abs=1e-14)


def test_features_entropy_fields(rng):
    agent = _agent(rng)
    t = _transition(rng)._replace(s=np.array([1.0, 1.0, 1.0]), s_next=np.array([1.0, 0.0, 0.0]))
    f = amr.features(agent, t)
    assert f.entropy_s == pytest.approx(1.0)
    assert f.entropy_s_next < 1e-6


def test_nonfinite_output_faults():
    net = amr.genome_to_network(_bias_genome(1e308))
    f = amr.AmrFeatures(0.0, 0.0, 0.0, 0.0)
    with pytest.raises(NumericFault):
        amr.augment(net, f, 1e10, 0.0)
    with pytest.raises(NumericFault):
        amr.augment(net, amr.AmrFeatures(np.nan, 0.0, 0.0, 0.0), 1.0, 0.0)


def test_stored_reward_is_augmented_but_score_is_raw(rng):
    env = envs.make_env("unit-reward")
    hp = small_hp(episodes=1, buffer_capacity=50, max_steps_per_episode=1)
    agent = ddpg.make_agent(env.spec, hp, rng)
    stats = ddpg.run_episode(agent, env, rng, amr.Augmenter(amr.genome_to_network(_bias_genome(0.5)), 1.0))
    assert stats.score == 1.0
    assert [t.r for t in agent.buffer.transitions()] == [1.5]


def _run(seed, genome=None, beta=1.0):
    env = envs.make_env("pendulum", max_steps=25)
    hp = small_hp(episodes=2, beta=beta, max_steps_per_episode=25)
    r = np.random.default_rng(seed)
    agent = ddpg.make_agent(env.spec, hp, r)
    aug = None if genome is None else amr.Augmenter(amr.genome_to_network(genome), beta)
    scores = [ddpg.run_episode(agent, env, r, aug).score for _ in range(hp.episodes)]
    return scores, agent.actor.flat.tobytes(), agent.critic.flat.tobytes()


def test_zero_genome_and_zero_beta_match_plain_ddpg(rng):
    base = _run(3)
    assert _run(3, np.zeros(25)) == base
    assert _run(3, rng.uniform(-1, 1, size=25), beta=0.0) == base
    assert _run(3, _bias_genome(0.5)) != base


def test_genome_file_round_trip(tmp_path, rng):
    g = amr.random_genome(rng)
    path = tmp_path / "g.txt"
    amr.save_genome(g, path)
    assert path.read_text().splitlines()[:2] == [amr.GENOME_HEADER, "length 25"]
    assert amr.load_genome(path).genes.tobytes() == g.genes.tobytes()


def test_genome_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0.1\n")
    with pytest.raises(ContractError):
        amr.load_genome(bad)
    bad.write_text(f"{amr.GENOME_HEADER}\nlength 25\n0.1\n")
    with pytest.raises(ContractError):
        amr.load_genome(bad)
