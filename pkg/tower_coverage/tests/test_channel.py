"""Unit tests for pathloss, user drops and the clustered channel generator."""

import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from tower_coverage.array import ArrayConfig, build_geometry, steering_vector
from tower_coverage.channel import (
    SITE_PRESETS,
    ChannelProfile,
    Duplex,
    FadingParams,
    RadioConfig,
    Scenario,
    SiteConfig,
    UserDrop,
    beyond_breakpoint,
    breakpoint_distance,
    drop_users,
    generate_channel,
    large_scale_gain,
    noise_power,
    pathloss_rma_los,
    pathloss_rma_nlos,
    write_channel_csv,
)
from tower_coverage.exceptions import (
    InvalidConfigError,
    InvalidDropError,
    OutOfRangeError,
)

SMALL_ARRAY = ArrayConfig(m_h=4, m_v=2)


class PathlossTest(SimpleTestCase):
    FC = 700e6
    H_BS = 150.0
    H_UT = 8.0

    def test_los_short_range_value(self):
        """Test LoS pathloss at 100 m from a 150 m tower at 700 MHz."""
        pathloss = pathloss_rma_los(100.0, self.FC, self.H_BS, self.H_UT)
        self.assertIsInstance(pathloss, float)
        self.assertAlmostEqual(pathloss, 69.7, delta=0.05)

    def test_doubling_beyond_breakpoint_adds_12_db(self):
        """Test doubling the distance past the breakpoint adds 40 log10 2."""
        d_bp = breakpoint_distance(self.FC, self.H_BS, self.H_UT)
        self.assertGreater(20000.0, d_bp)
        near = pathloss_rma_los(20000.0, self.FC, self.H_BS, self.H_UT)
        far = pathloss_rma_los(40000.0, self.FC, self.H_BS, self.H_UT)
        self.assertAlmostEqual(far - near, 40 * np.log10(2), places=6)

    def test_continuous_at_breakpoint(self):
        """Test both LoS slopes meet at the breakpoint."""
        d_bp = breakpoint_distance(self.FC, self.H_BS, self.H_UT)
        below = pathloss_rma_los(d_bp * (1 - 1e-9), self.FC, self.H_BS, self.H_UT)
        above = pathloss_rma_los(d_bp * (1 + 1e-9), self.FC, self.H_BS, self.H_UT)
        self.assertAlmostEqual(below, above, places=4)

    def test_slope_and_sigma_switch_at_the_same_distance(self):
        """Test far-slope users are exactly those with the far shadowing sigma."""
        d_bp = breakpoint_distance(self.FC, self.H_BS, self.H_UT)
        # A 3-D switch would already put the user at -0.4 m on the far slope
        distances = d_bp + np.array([-1.0, -0.4, 0.4, 1.0])
        drop = UserDrop(distances, np.zeros(distances.size))
        fading = FadingParams(shadow_sigma_db=0.0, shadow_sigma_far_db=5.0)
        site = SITE_PRESETS["high_tower"]
        radio = RadioConfig.for_carrier(700)
        _, pathloss, shadowing = large_scale_gain(
            site, radio, drop, fading, np.random.default_rng(0)
        )
        far = beyond_breakpoint(distances, self.FC, self.H_BS, self.H_UT)
        np.testing.assert_array_equal(far, [False, False, True, True])
        np.testing.assert_array_equal(shadowing != 0, far)
        slope_near = pathloss[1] - pathloss[0]
        slope_far = pathloss[3] - pathloss[2]
        self.assertAlmostEqual(slope_far, 40 * np.log10(distances[3] / distances[2]))
        self.assertNotAlmostEqual(slope_near, slope_far, places=6)

    def test_monotone_in_distance(self):
        """Test pathloss grows with distance for both scenarios."""
        distances = np.linspace(35.0, 30000.0, 200)
        for model in (pathloss_rma_los, pathloss_rma_nlos):
            with self.subTest(model=model.__name__):
                values = model(distances, self.FC, 25.0, self.H_UT)
                self.assertTrue(np.all(np.diff(values) > 0))

    def test_nlos_never_below_los(self):
        """Test NLoS pathloss is at least the LoS value."""
        distances = np.linspace(10.0, 20000.0, 300)
        for fc in (700e6, 1800e6, 3500e6):
            with self.subTest(fc=fc):
                los = pathloss_rma_los(distances, fc, 25.0, 1.5)
                nlos = pathloss_rma_nlos(distances, fc, 25.0, 1.5)
                self.assertTrue(np.all(nlos >= los))

    def test_out_of_range_inputs(self):
        """Test distances below 10 m and receiver heights above 10 m raise."""
        with self.assertRaises(OutOfRangeError):
            pathloss_rma_los(5.0, self.FC, self.H_BS, self.H_UT)
        with self.assertRaises(OutOfRangeError):
            pathloss_rma_nlos(np.array([50.0, 9.0]), self.FC, 25.0, self.H_UT)
        with self.assertRaises(OutOfRangeError) as ctx:
            pathloss_rma_los(100.0, self.FC, self.H_BS, 12.0)
        self.assertIn("Expected: 1-10 m", str(ctx.exception))


class RadioConfigTest(SimpleTestCase):
    def test_band_plan(self):
        """Test carriers map to the study's bandwidths and duplex modes."""
        expected = {
            700: (10e6, Duplex.FDD, 1.0),
            1800: (20e6, Duplex.FDD, 1.0),
            3500: (100e6, Duplex.TDD, 0.75),
        }
        for carrier, (bandwidth, duplex, fraction) in expected.items():
            with self.subTest(carrier=carrier):
                radio = RadioConfig.for_carrier(carrier)
                self.assertEqual(radio.carrier_frequency, carrier * 1e6)
                self.assertEqual(radio.bandwidth, bandwidth)
                self.assertEqual(radio.duplex, duplex)
                self.assertEqual(radio.dl_fraction, fraction)

    def test_unknown_carrier(self):
        """Test carriers outside the band plan are rejected."""
        with self.assertRaises(InvalidConfigError):
            RadioConfig.for_carrier(900)

    def test_noise_power(self):
        """Test thermal noise over the downlink bandwidth plus noise figure."""
        fdd = noise_power(RadioConfig.for_carrier(700))
        self.assertAlmostEqual(10 * np.log10(fdd) + 30, -97.0, places=9)
        tdd = noise_power(RadioConfig.for_carrier(3500))
        self.assertAlmostEqual(
            10 * np.log10(tdd) + 30, -174.0 + 10 * np.log10(75e6) + 7.0, places=9
        )

    def test_invalid_cp_overhead(self):
        """Test cyclic prefix overhead outside [0, 1) is rejected."""
        with self.assertRaises(InvalidConfigError):
            RadioConfig(700e6, 10e6, cp_overhead=1.0)


class SitePresetTest(SimpleTestCase):
    def test_presets(self):
        """Test legacy and high tower presets."""
        legacy, high = SITE_PRESETS["legacy"], SITE_PRESETS["high_tower"]
        self.assertEqual(
            (legacy.tx_height_m, legacy.tx_power_w, legacy.scenario),
            (25.0, 40.0, Scenario.RMA_NLOS),
        )
        self.assertEqual(
            (high.tx_height_m, high.tx_power_w, high.scenario),
            (150.0, 100.0, Scenario.RMA_LOS),
        )

    def test_non_positive_power(self):
        """Test zero transmit power is rejected."""
        with self.assertRaises(InvalidConfigError):
            SiteConfig(tx_height_m=25.0, tx_power_w=0.0, scenario=Scenario.RMA_NLOS)

    def test_fading_defaults_per_scenario(self):
        """Test scenario fading defaults and overrides."""
        los = FadingParams.for_scenario(Scenario.RMA_LOS)
        self.assertEqual(los.shadow_sigma_far_db, 6.0)
        nlos = FadingParams.for_scenario("RMa-NLoS", n_clusters=4)
        self.assertEqual(nlos.n_clusters, 4)
        self.assertIsNone(nlos.shadow_sigma_far_db)
        with self.assertRaises(InvalidConfigError):
            FadingParams(n_clusters=0)

    def test_calibrated_profile(self):
        """Test the calibrated profile sits between scenario defaults and overrides."""
        los = FadingParams.for_scenario(Scenario.RMA_LOS, ChannelProfile.CALIBRATED)
        self.assertIsNone(los.shadow_sigma_far_db)
        self.assertEqual((los.zenith_spread_deg, los.xpr_mean_db), (8.0, 12.0))
        nlos = FadingParams.for_scenario(
            "RMa-NLoS", "calibrated", zenith_spread_deg=3.0
        )
        self.assertEqual((nlos.zenith_spread_deg, nlos.xpr_mean_db), (3.0, 20.0))
        self.assertEqual(nlos.shadow_sigma_db, 10.0)

        radio = RadioConfig.for_carrier(700, ChannelProfile.CALIBRATED)
        self.assertEqual(radio.noise_figure_db, 10.0)
        radio = RadioConfig.for_carrier(700, "calibrated", noise_figure_db=4.0)
        self.assertEqual(radio.noise_figure_db, 4.0)
        self.assertEqual(RadioConfig.for_carrier(700, "3gpp").noise_figure_db, 7.0)

    def test_unknown_profile(self):
        """Test profiles outside the known set are rejected."""
        with self.assertRaises(InvalidConfigError):
            FadingParams.for_scenario(Scenario.RMA_LOS, "urban")
        with self.assertRaises(InvalidConfigError):
            RadioConfig.for_carrier(700, "urban")


class DropUsersTest(SimpleTestCase):
    def test_distances_within_annulus(self):
        """Test users fall between the minimum distance and the radius."""
        drop = drop_users(500, 2000.0, np.random.default_rng(1))
        self.assertEqual(drop.num_users, 500)
        self.assertTrue(np.all(drop.distances_m >= 35.0 - 1e-9))
        self.assertTrue(np.all(drop.distances_m <= 2000.0))
        self.assertTrue(np.all((drop.azimuths_deg >= 0) & (drop.azimuths_deg < 360)))

    def test_uniform_over_area(self):
        """Test half the users lie beyond radius / sqrt(2)."""
        drop = drop_users(20000, 5000.0, np.random.default_rng(2))
        share = np.mean(drop.distances_m > 5000.0 / np.sqrt(2))
        self.assertAlmostEqual(share, 0.5, delta=0.02)

    def test_radius_below_minimum_distance(self):
        """Test tiny radii place every user at the minimum distance."""
        drop = drop_users(3, 10.0, np.random.default_rng(0))
        np.testing.assert_array_equal(drop.distances_m, [35.0, 35.0, 35.0])

    def test_invalid_drops(self):
        """Test users closer than 35 m or mismatched arrays are rejected."""
        with self.assertRaises(InvalidDropError):
            UserDrop(np.array([20.0]), np.array([0.0]))
        with self.assertRaises(InvalidDropError):
            UserDrop(np.array([100.0, 200.0]), np.array([0.0]))


class LargeScaleGainTest(SimpleTestCase):
    DRAWS = 10_000

    def setUp(self):
        self.radio = RadioConfig.for_carrier(700)

    def gains(self, site_type, distance_m, fading, seed=0):
        site = SITE_PRESETS[site_type]
        drop = UserDrop(np.full(self.DRAWS, distance_m), np.zeros(self.DRAWS))
        rng = np.random.default_rng(seed)
        return large_scale_gain(site, self.radio, drop, fading, rng)

    def test_shadowing_standard_deviation(self):
        """Test sample shadowing std within 5% of sigma at every sigma in use."""
        d_bp = breakpoint_distance(700e6, 150.0, 8.0)
        cases = (
            ("legacy", 1000.0, Scenario.RMA_NLOS, 8.0),
            ("high_tower", 1000.0, Scenario.RMA_LOS, 4.0),
            ("high_tower", 2 * d_bp, Scenario.RMA_LOS, 6.0),
        )
        for site_type, distance, scenario, sigma in cases:
            with self.subTest(site_type=site_type, distance=distance):
                fading = FadingParams.for_scenario(scenario)
                _, _, shadowing = self.gains(site_type, distance, fading)
                self.assertAlmostEqual(shadowing.std(), sigma, delta=0.05 * sigma)
                self.assertAlmostEqual(shadowing.mean(), 0.0, delta=0.05 * sigma)

    def test_mean_gain_nonincreasing_in_distance(self):
        """Test average beta never grows with distance under one shadowing sigma."""
        distances = np.geomspace(35.0, 40_000.0, 40)
        for site_type, scenario in (
            ("legacy", Scenario.RMA_NLOS),
            ("high_tower", Scenario.RMA_LOS),
        ):
            with self.subTest(site_type=site_type):
                fading = FadingParams.for_scenario(scenario, "calibrated")
                # Same seed at every distance: identical normal draws
                means = [
                    self.gains(site_type, distance, fading)[0].mean()
                    for distance in distances
                ]
                self.assertTrue(np.all(np.diff(means) <= 0))


class GenerateChannelTest(SimpleTestCase):
    def setUp(self):
        self.radio = RadioConfig.for_carrier(700)
        self.legacy = replace(SITE_PRESETS["legacy"], array=SMALL_ARRAY)
        self.high = replace(SITE_PRESETS["high_tower"], array=SMALL_ARRAY)

    def test_shape_and_large_scale(self):
        """Test M x K shape and beta from pathloss plus shadowing."""
        drop = drop_users(5, 3000.0, np.random.default_rng(4))
        fading = FadingParams.for_scenario(self.legacy.scenario)
        channel = generate_channel(self.legacy, self.radio, drop, fading, 9)

        self.assertEqual(channel.entries.shape, (8, 5))
        self.assertEqual((channel.num_antennas, channel.num_users), (8, 5))
        np.testing.assert_allclose(
            10 * np.log10(channel.large_scale_gain),
            -(channel.pathloss_db + channel.shadowing_db),
        )

    def test_deterministic_per_seed(self):
        """Test equal seeds give identical channels and other seeds differ."""
        drop = drop_users(4, 2000.0, np.random.default_rng(0))
        fading = FadingParams.for_scenario(self.high.scenario)
        first = generate_channel(self.high, self.radio, drop, fading, 42)
        again = generate_channel(self.high, self.radio, drop, fading, 42)
        other = generate_channel(self.high, self.radio, drop, fading, 43)

        np.testing.assert_array_equal(first.entries, again.entries)
        self.assertFalse(np.allclose(first.entries, other.entries))

    def test_unit_average_small_scale_power(self):
        """Test small-scale fading has unit average power per element."""
        drop = drop_users(10_000, 1000.0, np.random.default_rng(5))
        for site in (self.legacy, self.high):
            with self.subTest(scenario=site.scenario):
                fading = FadingParams.for_scenario(site.scenario)
                channel = generate_channel(site, self.radio, drop, fading, 11)
                normalized = np.abs(channel.entries) ** 2 / channel.large_scale_gain
                self.assertAlmostEqual(normalized.mean(), 1.0, delta=0.02)

    def test_dual_polarization_power(self):
        """Test dual-polarized arrays keep unit average power per element."""
        site = replace(self.legacy, array=replace(SMALL_ARRAY, polarizations=2))
        drop = drop_users(10_000, 1000.0, np.random.default_rng(6))
        for profile in ChannelProfile:
            with self.subTest(profile=profile):
                fading = FadingParams.for_scenario(site.scenario, profile)
                channel = generate_channel(site, self.radio, drop, fading, 12)
                self.assertEqual(channel.num_antennas, 16)
                normalized = np.abs(channel.entries) ** 2 / channel.large_scale_gain
                self.assertAlmostEqual(normalized.mean(), 1.0, delta=0.02)

    def test_pure_specular_limit(self):
        """Test very large K-factors reduce each column to its steering vector."""
        fading = FadingParams(rician_k_mean_db=300.0, rician_k_std_db=0.0)
        drop = drop_users(3, 5000.0, np.random.default_rng(7))
        channel = generate_channel(self.high, self.radio, drop, fading, 3)
        geometry = build_geometry(SMALL_ARRAY, self.radio.carrier_frequency)

        for k in range(3):
            expected = steering_vector(
                geometry,
                channel.los_azimuth_deg[k],
                channel.los_elevation_deg[k],
                self.radio.carrier_frequency,
            )
            column = channel.entries[:, k] / np.sqrt(channel.large_scale_gain[k])
            np.testing.assert_allclose(column, expected, atol=1e-9)

    def test_los_elevation_points_down(self):
        """Test users below the tower are seen at negative elevation."""
        drop = UserDrop(np.array([142.0]), np.array([30.0]))
        fading = FadingParams.for_scenario(self.high.scenario)
        channel = generate_channel(self.high, self.radio, drop, fading, 0)
        self.assertAlmostEqual(channel.los_elevation_deg[0], -45.0)
        self.assertEqual(channel.los_azimuth_deg[0], 30.0)

    def test_zero_users(self):
        """Test an empty drop is rejected."""
        drop = UserDrop(np.array([]), np.array([]))
        fading = FadingParams()
        with self.assertRaises(InvalidDropError):
            generate_channel(self.legacy, self.radio, drop, fading, 0)

    def test_transmitter_below_receiver(self):
        """Test a transmitter lower than the receiver is rejected."""
        site = replace(self.legacy, tx_height_m=5.0)
        drop = UserDrop(np.array([100.0]), np.array([0.0]))
        with self.assertRaises(InvalidConfigError):
            generate_channel(site, self.radio, drop, FadingParams(), 0)


class WriteChannelCsvTest(SimpleTestCase):
    def test_writes_matrix_and_users(self):
        """Test channel dump writes antenna,user,real,imag rows and user file."""
        radio = RadioConfig.for_carrier(1800)
        site = replace(SITE_PRESETS["legacy"], array=SMALL_ARRAY)
        drop = drop_users(2, 1500.0, np.random.default_rng(8))
        channel = generate_channel(site, radio, drop, FadingParams(), 1)

        with tempfile.TemporaryDirectory() as tmp:
            matrix_path, users_path = write_channel_csv(
                channel, Path(tmp) / "channel.csv", {"seed": 1}, 1
            )
            self.assertEqual(users_path.name, "channel_users.csv")
            with open(matrix_path) as file:
                self.assertEqual(file.readline().strip(), "# seed=1")

            matrix = pd.read_csv(matrix_path, comment="#")
            users = pd.read_csv(users_path, comment="#")

        self.assertEqual(list(matrix.columns), ["antenna", "user", "real", "imag"])
        self.assertEqual(len(matrix), 16)
        rebuilt = np.zeros((8, 2), dtype=complex)
        values = matrix["real"].to_numpy() + 1j * matrix["imag"].to_numpy()
        rebuilt[matrix["antenna"].to_numpy(), matrix["user"].to_numpy()] = values
        np.testing.assert_allclose(rebuilt, channel.entries, rtol=1e-8)
        self.assertEqual(len(users), 2)
