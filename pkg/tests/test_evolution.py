import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nesgd import evolution, nn
from nesgd.errors import StateError
from nesgd.evolution import (
    EvolutionConfig,
    Individual,
    binary_tournament,
    crossover,
    environmental_selection,
    evaluate_fitness,
    generate_offspring,
    mutate,
    nabla,
    run,
)
from nesgd.genome import Genome

from helpers import StubRng, tiny_dataset, tiny_evolution_config, tiny_train_config


def individual(idx, fitness=None, genome="1010", birth=0):
    return Individual(
        id=idx, genome=Genome.from_text(genome), raw_fitness=fitness, birth_generation=birth
    )


class TestBinaryTournament:
    def test_population_of_one(self):
        only = individual(0, 0.5)
        assert binary_tournament([only], StubRng([0, 0], [0.9])) is only

    def test_higher_fitness_wins_when_both_drawn(self):
        strong, weak = individual(0, 0.9), individual(1, 0.1)
        assert binary_tournament([strong, weak], StubRng([0, 1])) is strong
        assert binary_tournament([strong, weak], StubRng([1, 0])) is strong

    def test_exact_tie_uses_coin_flip(self):
        a, b = individual(0, 0.5), individual(1, 0.5)
        assert binary_tournament([a, b], StubRng([0, 1], [0.2])) is a
        assert binary_tournament([a, b], StubRng([0, 1], [0.8])) is b

    def test_adjusted_fitness_preferred_when_present(self):
        a, b = individual(0, 0.9), individual(1, 0.8)
        a.adjusted_fitness = 0.009  # suppressed
        b.adjusted_fitness = 0.8
        assert binary_tournament([a, b], StubRng([0, 1])) is b

    def test_missing_fitness_raises(self):
        with pytest.raises(StateError):
            binary_tournament([individual(0)], StubRng([0, 0]))

    def test_win_rates_match_closed_form(self):
        members = [individual(0, 0.9), individual(1, 0.5), individual(2, 0.1)]
        rng = np.random.default_rng(123)
        wins = np.zeros(3)
        trials = 10_000
        for _ in range(trials):
            wins[binary_tournament(members, rng).id] += 1
        assert abs(wins[0] / trials - 5 / 9) < 0.03
        assert abs(wins[1] / trials - 3 / 9) < 0.03
        assert abs(wins[2] / trials - 1 / 9) < 0.03


class TestCrossover:
    def test_zero_probability_clones(self):
        g1, g2 = Genome.from_text("1111"), Genome.from_text("0000")
        c1, c2 = crossover(g1, g2, 0.0, np.random.default_rng(0))
        assert c1 == g1 and c2 == g2

    def test_cut_at_two(self):
        g1, g2 = Genome.from_text("1111"), Genome.from_text("0000")
        c1, c2 = crossover(g1, g2, 1.0, StubRng([2], [0.0]))
        assert c1.text == "1100"
        assert c2.text == "0011"

    @settings(max_examples=80, deadline=None)
    @given(
        bits1=st.lists(st.integers(0, 1), min_size=2, max_size=12),
        bits2=st.lists(st.integers(0, 1), min_size=2, max_size=12),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_columns_preserve_parent_multisets(self, bits1, bits2, seed):
        n = min(len(bits1), len(bits2))
        g1, g2 = Genome(tuple(bits1[:n])), Genome(tuple(bits2[:n]))
        c1, c2 = crossover(g1, g2, 0.9, np.random.default_rng(seed))
        for k in range(n):
            assert sorted([c1.bits[k], c2.bits[k]]) == sorted([g1.bits[k], g2.bits[k]])


class TestMutate:
    def test_zero_rate_is_identity(self):
        g = Genome.from_text("0110")
        assert mutate(g, 0.0, np.random.default_rng(0)) == g

    def test_rate_one_complements(self):
        g = Genome.from_text("0110")
        assert mutate(g, 1.0, np.random.default_rng(0)).text == "1001"

    def test_mean_flip_count(self):
        rng = np.random.default_rng(9)
        g = Genome(tuple([0] * 20))
        flips = sum(sum(mutate(g, 0.1, rng).bits) for _ in range(10_000))
        assert 1.8 <= flips / 10_000 <= 2.2


class TestGenerateOffspring:
    def evaluated_population(self, m=5):
        rng = np.random.default_rng(3)
        members = []
        for i in range(m):
            ind = individual(i, fitness=float(rng.uniform(0.2, 0.9)), genome="101001")
            members.append(ind)
        return members

    def test_produces_exactly_m(self):
        config = tiny_evolution_config(population_size=5)
        kids = generate_offspring(
            self.evaluated_population(5), config, np.random.default_rng(4), start_id=10
        )
        assert len(kids) == 5
        assert [k.id for k in kids] == [10, 11, 12, 13, 14]
        assert all(len(k.genome) == 6 for k in kids)
        assert all(len(k.parent_ids) == 2 for k in kids)

    def test_deterministic(self):
        config = tiny_evolution_config(population_size=4)
        runs = [
            generate_offspring(
                self.evaluated_population(4), config, np.random.default_rng(11), start_id=4
            )
            for _ in range(2)
        ]
        assert [k.genome for k in runs[0]] == [k.genome for k in runs[1]]


class TestEnvironmentalSelection:
    def make_combined(self, fitnesses, genomes=None):
        members = []
        for i, fit in enumerate(fitnesses):
            text = genomes[i] if genomes else format(i, "04b")
            members.append(individual(i, fit, genome=text))
        return members

    def test_suppression_off_keeps_top_m_raw(self):
        config = tiny_evolution_config(population_size=3, suppression_enabled=False)
        combined = self.make_combined([0.1, 0.9, 0.3, 0.7, 0.5, 0.2])
        pop = environmental_selection(combined, config)
        assert sorted(ind.id for ind in pop.members) == [1, 3, 4]
        assert all(ind.adjusted_fitness == ind.raw_fitness for ind in combined)
        assert pop.suppressed_count == 0

    def test_wrong_pool_size_rejected(self):
        config = tiny_evolution_config(population_size=3)
        with pytest.raises(StateError):
            environmental_selection(self.make_combined([0.5] * 5), config)

    def test_crowded_cluster_minimum_drops_out(self):
        # ten genomes: four identical (cluster A), two pairs, two loners.
        # A holds ranks 2-5 by raw fitness; its minimum (id 2, rank 5) would
        # survive a plain top-5 cut but is suppressed to 0.008 and drops out,
        # letting rank 6 (id 5) in. The raw best sits outside A and survives
        # through elitism either way.
        genomes = [
            "000000", "000000", "000000", "000000",
            "111100", "111100",
            "001111", "001111",
            "110011", "010101",
        ]
        raw = [0.90, 0.85, 0.80, 0.88, 0.95, 0.75, 0.70, 0.65, 0.60, 0.55]
        config = tiny_evolution_config(population_size=5, suppression_enabled=True)
        combined = self.make_combined(raw, genomes)
        pop = environmental_selection(combined, config)
        assert sorted(ind.id for ind in pop.members) == [0, 1, 3, 4, 5]
        assert combined[2].adjusted_fitness == 0.80 * 1e-2
        assert pop.suppressed_count == 1

        without = self.make_combined(raw, genomes)
        config_off = tiny_evolution_config(population_size=5, suppression_enabled=False)
        pop_off = environmental_selection(without, config_off)
        assert sorted(ind.id for ind in pop_off.members) == [0, 1, 2, 3, 4]

    def test_suppression_can_evict_a_strong_cluster_member(self):
        # every merge happens at distance zero, so the clusters are exactly
        # {0,1,2,3}, {4,5}, {6}, {7}; the big cluster's minimum is id 0
        genomes = ["000000"] * 4 + ["111111", "111111", "110100", "001011"]
        raw = [0.99, 0.995, 0.996, 0.997, 0.60, 0.30, 0.20, 0.10]
        combined = self.make_combined(raw, genomes)
        config = tiny_evolution_config(population_size=4, suppression_enabled=True)
        pop = environmental_selection(combined, config)
        suppressed = [ind for ind in combined if ind.adjusted_fitness != ind.raw_fitness]
        assert [ind.id for ind in suppressed] == [0]
        assert sorted(ind.id for ind in pop.members) == [1, 2, 3, 4]

    def test_elitism_overrides_suppression(self):
        # the whole crowded cluster ties for best raw; id 0 is both the
        # cluster minimum (tie -> lowest id) and the elite (tie -> lowest id)
        genomes = ["000000"] * 4 + ["111111", "111111", "110100", "001011"]
        raw = [0.9, 0.9, 0.9, 0.9, 0.6, 0.5, 0.45, 0.4]
        combined = self.make_combined(raw, genomes)
        config = tiny_evolution_config(population_size=4, suppression_enabled=True)
        pop = environmental_selection(combined, config)
        assert combined[0].adjusted_fitness == 0.9 * 1e-2
        assert 0 in [ind.id for ind in pop.members]


class TestNabla:
    def test_equal_fitness_gives_zero(self):
        assert nabla([individual(0, 0.5), individual(1, 0.5)]) == 0.0

    def test_paper_scale_example(self):
        assert nabla([individual(0, 0.948), individual(1, 0.934)]) == pytest.approx(0.014)

    def test_singleton_is_zero(self):
        assert nabla([individual(0, 0.7)]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(StateError):
            nabla([])


class TestEvaluateFitness:
    def setup_run(self):
        dataset = tiny_dataset()
        model = nn.build_model((2, 6, 2), seed=5)
        config = tiny_evolution_config()
        lr_map = {b.block_id: config.train.lr_reinit for b in model.partition.blocks}
        nn.sgd_train(model, dataset.arrays("train"), config.train, lr_map)
        return dataset, model, nn.snapshot(model, "alpha"), config

    def test_all_ones_zero_epochs_equals_base_accuracy(self):
        dataset, model, base, config = self.setup_run()
        config = tiny_evolution_config(train=tiny_train_config(epochs_beta=0))
        ind = individual(0, genome="1111")
        fitness = evaluate_fitness(ind, base, model, dataset, config)
        assert fitness == nn.evaluate_accuracy(model, dataset.arrays("validation"))

    def test_all_ones_zero_retained_rate_equals_base_accuracy(self):
        dataset, model, base, config = self.setup_run()
        config = tiny_evolution_config(
            train=tiny_train_config(lr_retained=0.0, epochs_beta=4, momentum=0.0)
        )
        ind = individual(0, genome="1111")
        fitness = evaluate_fitness(ind, base, model, dataset, config)
        assert fitness == nn.evaluate_accuracy(model, dataset.arrays("validation"))

    def test_order_independent(self):
        dataset, model, base, config = self.setup_run()
        a = individual(3, genome="1001", birth=1)
        b = individual(4, genome="0110", birth=1)
        first = (
            evaluate_fitness(a, base, model, dataset, config),
            evaluate_fitness(b, base, model, dataset, config),
        )
        second = (
            evaluate_fitness(b, base, model, dataset, config),
            evaluate_fitness(a, base, model, dataset, config),
        )
        assert first == (second[1], second[0])

    def test_divergence_returns_zero_and_warns(self, caplog):
        dataset, model, base, config = self.setup_run()
        for block_id in base.values:
            base.values[block_id][...] = 3e38
        ind = individual(0, genome="1111")
        with caplog.at_level("WARNING", logger="nesgd"):
            fitness = evaluate_fitness(ind, base, model, dataset, config)
        assert fitness == 0.0
        assert any("fitness set to 0" in rec.message for rec in caplog.records)


class TestRun:
    def fast_config(self, **overrides):
        train = tiny_train_config(epochs_alpha=8, epochs_beta=3)
        return tiny_evolution_config(train=train, **overrides)

    def test_smoke_contract(self):
        config = self.fast_config(population_size=2, max_generations=1)
        result = run(config, tiny_dataset(), (2, 6, 2))
        assert len(result.logs) == 1
        assert 0.0 <= result.logs[0].best_raw <= 1.0
        assert 0.0 <= result.best.raw_fitness <= 1.0
        assert result.best_snapshot.tag == "beta"
        assert set(result.best_snapshot.values) == {0, 1, 2, 3}

    def test_elitism_makes_best_monotone(self):
        config = self.fast_config(population_size=3, max_generations=4)
        result = run(config, tiny_dataset(), (2, 6, 2))
        best = [log.best_raw for log in result.logs]
        assert best == sorted(best)

    def test_same_seed_identical_logs(self):
        config = self.fast_config(population_size=3, max_generations=2)
        a = run(config, tiny_dataset(), (2, 6, 2))
        b = run(config, tiny_dataset(), (2, 6, 2))
        strip = lambda log: (
            log.generation,
            log.best_raw,
            log.median_raw,
            log.min_raw,
            log.nabla,
            log.suppressed_count,
            log.best_genome,
        )
        assert [strip(l) for l in a.logs] == [strip(l) for l in b.logs]
        assert a.best.id == b.best.id

    def test_parallel_matches_serial(self):
        config = self.fast_config(population_size=3, max_generations=2)
        serial = run(config, tiny_dataset(), (2, 6, 2), parallel=1)
        threaded = run(config, tiny_dataset(), (2, 6, 2), parallel=4)
        assert [l.best_raw for l in serial.logs] == [l.best_raw for l in threaded.logs]
        assert [l.best_genome for l in serial.logs] == [l.best_genome for l in threaded.logs]
        for block_id in serial.best_snapshot.values:
            assert np.array_equal(
                serial.best_snapshot.values[block_id],
                threaded.best_snapshot.values[block_id],
            )

    def test_nabla_matches_member_records(self):
        config = self.fast_config(population_size=3, max_generations=3)
        captured = []
        run(config, tiny_dataset(), (2, 6, 2), on_generation=lambda log, pop: captured.append((log, pop)))
        for log, pop in captured:
            raws = [ind.raw_fitness for ind in pop.members]
            assert log.nabla == max(raws) - min(raws)
            assert log.best_raw == max(raws)
            assert log.min_raw == min(raws)
            assert len(pop.members) == 3

    def test_population_size_constant(self):
        config = self.fast_config(population_size=3, max_generations=2)
        sizes = []
        run(config, tiny_dataset(), (2, 6, 2), on_generation=lambda log, pop: sizes.append(len(pop.members)))
        assert sizes == [3, 3]
