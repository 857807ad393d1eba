"""Unit tests for Monte-Carlo coverage distance estimation."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from unittest.mock import patch

from django.test import SimpleTestCase

from tower_coverage.array import ArrayConfig
from tower_coverage.channel import SITE_PRESETS, RadioConfig
from tower_coverage.coverage import (
    TABLE_COLUMNS,
    CoverageQuery,
    CoverageResult,
    CurvePoint,
    coverage_distance,
    coverage_table,
    evaluate_distance,
    pivot_rows,
    sample_distance,
    simulate_trial,
    table_queries,
    trial_seed,
    wilson_half_width,
)
from tower_coverage.exceptions import InvalidConfigError, NumericalError

SMALL_ARRAY = ArrayConfig(m_h=4, m_v=2)


def small_query(**overrides):
    options = dict(
        site_type="high_tower",
        site=replace(SITE_PRESETS["high_tower"], array=SMALL_ARRAY),
        radio=RadioConfig.for_carrier(700),
        num_users=2,
        trials=2,
        distance_grid_km=1.0,
        max_distance_km=4.0,
        master_seed=7,
    )
    options.update(overrides)
    return CoverageQuery(**options)


def step_curve(edge_km):
    """Fake sampler: every user satisfied up to edge_km, none beyond."""

    def sample(query, distance_km, executor=None):
        fraction = 1.0 if distance_km <= edge_km + 1e-9 else 0.0
        samples = query.trials * query.num_users
        return CurvePoint(
            distance_km=round(distance_km, 6),
            satisfied_fraction=fraction,
            half_width=0.0,
            satisfied=int(fraction * samples),
            samples=samples,
        )

    return sample


class WilsonHalfWidthTest(SimpleTestCase):
    def test_known_value(self):
        """Test the 95% Wilson half-width at p = 0.5, n = 100."""
        self.assertAlmostEqual(wilson_half_width(50, 100), 0.0962, delta=1e-3)

    def test_edge_cases(self):
        """Test zero samples give zero and extreme proportions stay positive."""
        self.assertEqual(wilson_half_width(0, 0), 0.0)
        self.assertGreater(wilson_half_width(100, 100), 0.0)
        self.assertGreater(wilson_half_width(50, 100), wilson_half_width(500, 1000))


class CoverageQueryTest(SimpleTestCase):
    def test_invalid_queries(self):
        """Test threshold, trial, user and grid validation."""
        for overrides in (
            {"satisfaction_threshold": 1.0},
            {"satisfaction_threshold": 0.0},
            {"trials": 0},
            {"num_users": 0},
            {"distance_grid_km": 0.0},
            {"max_distance_km": 0.5},
        ):
            with self.subTest(overrides=overrides):
                with self.assertRaises(InvalidConfigError):
                    small_query(**overrides)

    def test_fading_defaults_from_site(self):
        """Test the scenario's fading defaults fill a missing fading set."""
        query = small_query()
        self.assertEqual(query.fading.shadow_sigma_far_db, 6.0)
        self.assertEqual(query.polarizations, 1)


class TrialSeedTest(SimpleTestCase):
    def test_seed_depends_on_all_indices(self):
        """Test trial seeds are reproducible and distinct per index."""
        state = trial_seed(1, 2, 3).generate_state(4)
        self.assertEqual(list(state), list(trial_seed(1, 2, 3).generate_state(4)))
        for other in ((2, 2, 3), (1, 3, 3), (1, 2, 4)):
            with self.subTest(other=other):
                self.assertNotEqual(
                    list(state), list(trial_seed(*other).generate_state(4))
                )

    def test_simulate_trial_is_deterministic(self):
        """Test a trial counts the same satisfied users on every call."""
        query = small_query(num_users=3)
        first = simulate_trial(query, 2.0, 2, 0)
        self.assertEqual(first, simulate_trial(query, 2.0, 2, 0))
        self.assertTrue(0 <= first <= 3)


class SampleDistanceTest(SimpleTestCase):
    def test_pooled_statistics(self):
        """Test satisfaction pools users across trials."""
        query = small_query(trials=3, num_users=2)
        point = sample_distance(query, 1.0)
        self.assertEqual(point.samples, 6)
        self.assertAlmostEqual(point.satisfied_fraction, point.satisfied / 6)
        self.assertEqual(point.distance_km, 1.0)

    def test_executor_independent(self):
        """Test a worker pool yields the same point as serial evaluation."""
        query = small_query(trials=3)
        serial = sample_distance(query, 2.0)
        with ThreadPoolExecutor(max_workers=2) as executor:
            pooled = sample_distance(query, 2.0, executor)
        self.assertEqual(serial, pooled)

    def test_evaluate_distance_is_the_pooled_fraction(self):
        """Test the satisfied fraction matches the sampled curve point."""
        query = small_query(trials=2)
        point = sample_distance(query, 3.0)
        fraction = evaluate_distance(query, 3.0)
        self.assertEqual(fraction, point.satisfied_fraction)
        self.assertTrue(0.0 <= fraction <= 1.0)


class CoverageDistanceTest(SimpleTestCase):
    def test_finds_last_passing_grid_point(self):
        """Test doubling and bisection stop at the last passing distance."""
        query = small_query(distance_grid_km=0.1, max_distance_km=100.0)
        with patch(
            "tower_coverage.coverage.sample_distance", side_effect=step_curve(3.3)
        ):
            result = coverage_distance(query)
        self.assertEqual(result.d_cov_km, 3.3)
        self.assertIsNone(result.diagnostic)
        distances = [point.distance_km for point in result.curve]
        self.assertEqual(distances, sorted(distances))
        self.assertIn(3.3, distances)
        self.assertIn(3.4, distances)

    def test_threshold_unmet_at_first_distance(self):
        """Test coverage 0 with a diagnostic when the first point fails."""
        query = small_query(distance_grid_km=0.1)
        with patch(
            "tower_coverage.coverage.sample_distance", side_effect=step_curve(0.0)
        ):
            result = coverage_distance(query)
        self.assertEqual(result.d_cov_km, 0.0)
        self.assertIn("unmet", result.diagnostic)
        self.assertEqual(len(result.curve), 1)

    def test_search_limit(self):
        """Test coverage beyond the search limit is capped and flagged."""
        query = small_query(distance_grid_km=0.1, max_distance_km=1.0)
        with patch(
            "tower_coverage.coverage.sample_distance", side_effect=step_curve(50.0)
        ):
            result = coverage_distance(query)
        self.assertEqual(result.d_cov_km, 1.0)
        self.assertIn("search limit", result.diagnostic)

    def test_simulated_distance_is_reproducible(self):
        """Test a small simulated sweep repeats exactly."""
        query = small_query()
        first = coverage_distance(query)
        again = coverage_distance(query)
        self.assertEqual(first.d_cov_km, again.d_cov_km)
        self.assertEqual(first.curve, again.curve)
        self.assertLessEqual(first.d_cov_km, query.max_distance_km)
        self.assertEqual(first.d_cov_km % query.distance_grid_km, 0.0)


class TableQueriesTest(SimpleTestCase):
    def test_full_sweep(self):
        """Test the sweep spans site, carrier, polarization and K."""
        queries = table_queries()
        self.assertEqual(len(queries), 36)
        self.assertEqual(len(table_queries(polarizations=(1,))), 18)
        self.assertEqual(len(table_queries(site_types=("legacy",))), 18)

    def test_overrides_and_options(self):
        """Test site, array and query options flow into every query."""
        queries = table_queries(
            site_types=("legacy",),
            users=(20,),
            carriers_mhz=(3500,),
            polarizations=(2,),
            array=SMALL_ARRAY,
            site_overrides={"legacy": {"tx_power_w": 20.0}},
            trials=5,
        )
        (query,) = queries
        self.assertEqual(query.site.tx_power_w, 20.0)
        self.assertEqual(query.site.array.num_elements, 16)
        self.assertEqual(query.trials, 5)
        self.assertEqual(query.radio.dl_fraction, 0.75)

    def test_channel_profile(self):
        """Test the sweep runs calibrated unless the 3gpp profile is asked for."""
        options = dict(site_types=("legacy",), users=(20,), carriers_mhz=(700,))
        calibrated = table_queries(polarizations=(1,), **options)[0]
        self.assertEqual(calibrated.radio.noise_figure_db, 10.0)
        self.assertEqual(calibrated.fading.shadow_sigma_db, 10.0)

        standard = table_queries(polarizations=(1,), profile="3gpp", **options)[0]
        self.assertEqual(standard.radio.noise_figure_db, 7.0)
        self.assertEqual(standard.fading.shadow_sigma_db, 8.0)

        overridden = table_queries(
            polarizations=(1,),
            radio_overrides={"noise_figure_db": 3.0},
            fading_overrides={"legacy": {"shadow_sigma_db": 2.0}},
            **options,
        )[0]
        self.assertEqual(overridden.radio.noise_figure_db, 3.0)
        self.assertEqual(overridden.fading.shadow_sigma_db, 2.0)

    def test_unknown_site_type(self):
        """Test unknown site types are rejected."""
        with self.assertRaises(InvalidConfigError):
            table_queries(site_types=("rooftop",))


class CoverageTableTest(SimpleTestCase):
    def setUp(self):
        self.queries = table_queries(
            site_types=("high_tower", "legacy"),
            users=(50, 20),
            carriers_mhz=(1800, 700),
            polarizations=(2, 1),
            array=SMALL_ARRAY,
        )

    @staticmethod
    def fake_distance(query, executor=None):
        if query.site_type == "legacy" and query.num_users == 50:
            raise NumericalError("Max-min bisection found no feasible SINR target")
        return CoverageResult(d_cov_km=float(query.polarizations))

    def test_rows_sorted_and_errors_kept(self):
        """Test rows sort by type, carrier, K and keep failures."""
        with patch(
            "tower_coverage.coverage.coverage_distance", side_effect=self.fake_distance
        ):
            rows = coverage_table(self.queries)

        self.assertEqual(len(rows), 16)
        keys = [
            (row.site_type, row.carrier_mhz, row.num_users, row.polarizations)
            for row in rows
        ]
        self.assertEqual(keys[0], ("legacy", 700, 20, 1))
        self.assertEqual(keys[-1], ("high_tower", 1800, 50, 2))

        failed = [row for row in rows if row.error]
        self.assertEqual(len(failed), 4)
        for row in failed:
            self.assertIsNone(row.d_cov_km)
            self.assertEqual(row.exit_code, 2)

    def test_pivot(self):
        """Test single and dual polarization fold into one line."""
        with patch(
            "tower_coverage.coverage.coverage_distance", side_effect=self.fake_distance
        ):
            frame = pivot_rows(coverage_table(self.queries))

        self.assertEqual(list(frame.columns), TABLE_COLUMNS)
        self.assertEqual(len(frame), 8)
        first = frame.iloc[0]
        self.assertEqual(
            (first["type"], first["K"], first["fc"], first["duplex"], first["B"]),
            ("legacy", 20, 700, "FDD", 10.0),
        )
        self.assertEqual((first["dcov_single"], first["dcov_dual"]), (1.0, 2.0))

    def test_empty_queries(self):
        """Test an empty sweep is rejected."""
        with self.assertRaises(InvalidConfigError):
            coverage_table([])


def full_array_query(site_type, num_users=20, polarizations=1, **options):
    (query,) = table_queries(
        site_types=(site_type,),
        users=(num_users,),
        carriers_mhz=(700,),
        polarizations=(polarizations,),
        **options,
    )
    return query


class SatisfactionCurveTest(SimpleTestCase):
    def test_everyone_satisfied_near_a_high_tower(self):
        """Test all users within 1 km of a high tower reach the target rate."""
        query = full_array_query("high_tower", trials=5)
        self.assertEqual(evaluate_distance(query, 1.0), 1.0)

    def test_fraction_falls_across_the_coverage_distance(self):
        """Test satisfaction at twice d_cov is below that at half d_cov."""
        query = full_array_query("legacy", trials=10)
        d_cov = coverage_distance(query).d_cov_km
        self.assertGreater(d_cov, 0.0)
        near = evaluate_distance(query, d_cov / 2)
        far = evaluate_distance(query, 2 * d_cov)
        self.assertLess(far, near)


class CalibratedSweepTest(SimpleTestCase):
    """700 MHz sweep under the default channel profile, reduced trials."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.d_cov = {}
        for site_type, grid_km in (("legacy", 0.1), ("high_tower", 0.5)):
            for users, trials in (((20,), 40), ((50, 100), 20)):
                queries = table_queries(
                    site_types=(site_type,),
                    users=users,
                    carriers_mhz=(700,),
                    trials=trials,
                    distance_grid_km=grid_km,
                )
                for query in queries:
                    key = (site_type, query.num_users, query.polarizations)
                    cls.d_cov[key] = coverage_distance(query).d_cov_km

    def test_distance_nonincreasing_in_users(self):
        """Test more active users never extend coverage."""
        for site_type in ("legacy", "high_tower"):
            for pol in (1, 2):
                with self.subTest(site_type=site_type, polarizations=pol):
                    distances = [self.d_cov[site_type, k, pol] for k in (20, 50, 100)]
                    self.assertGreater(distances[-1], 0.0)
                    self.assertEqual(distances, sorted(distances, reverse=True))

    def test_dual_polarization_reaches_as_far(self):
        """Test dual polarization covers at least the single-polarized range."""
        for site_type in ("legacy", "high_tower"):
            for k in (20, 50, 100):
                with self.subTest(site_type=site_type, K=k):
                    self.assertGreaterEqual(
                        self.d_cov[site_type, k, 2], self.d_cov[site_type, k, 1]
                    )

    def test_high_tower_reach(self):
        """Test high towers reach 4.5 times as far as legacy sites."""
        for k in (20, 50, 100):
            for pol in (1, 2):
                with self.subTest(K=k, polarizations=pol):
                    high = self.d_cov["high_tower", k, pol]
                    self.assertGreaterEqual(high / self.d_cov["legacy", k, pol], 4.5)

    def test_high_tower_area(self):
        """Test a dual-polarized high tower covers 40 legacy areas at K=20."""
        ratio = self.d_cov["high_tower", 20, 2] / self.d_cov["legacy", 20, 2]
        self.assertGreaterEqual(ratio**2, 40.0)
