"""Django management command to dump one channel realization."""

import logging
from typing import Any, Dict

import numpy as np

from tower_coverage.channel import (
    drop_users,
    generate_channel,
    noise_power,
    write_channel_csv,
)
from tower_coverage.management.base import RunCommand
from tower_coverage.mimo import effective_gains, maxmin_power, rzf_precode, user_rates
from tower_coverage.runconfig import fading_params, radio_config, site_config
from tower_coverage.utils import write_json_artifact

logger = logging.getLogger("tower_coverage.commands")


class Command(RunCommand):
    help = "Write one seeded channel matrix and its downlink rates"

    def add_command_arguments(self, parser: Any) -> None:
        parser.add_argument("--site-type", help="legacy or high_tower")
        parser.add_argument("--carrier", type=int, help="Carrier in MHz")
        parser.add_argument("--polarizations", type=int, help="1 or 2")
        parser.add_argument("--users", type=int, help="Number of users K")
        parser.add_argument("--distance-km", type=float, help="Drop radius")

    def config_flags(self, options: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "channel_dump.site_type": options["site_type"],
            "channel_dump.carrier_mhz": options["carrier"],
            "channel_dump.polarizations": options["polarizations"],
            "channel_dump.num_users": options["users"],
            "channel_dump.distance_km": options["distance_km"],
        }

    def run(self, resolved, executor, record, options) -> None:
        config, seed = resolved.config, resolved.seed
        dump = config["channel_dump"]
        site = site_config(config, dump["site_type"], dump["polarizations"])
        radio = radio_config(config, dump["carrier_mhz"])
        fading = fading_params(config, dump["site_type"])

        rng = np.random.default_rng(np.random.SeedSequence(seed))
        drop = drop_users(
            dump["num_users"],
            dump["distance_km"] * 1000.0,
            rng,
            rx_height_m=config["coverage"]["rx_height_m"],
        )
        channel = generate_channel(site, radio, drop, fading, rng)

        noise = noise_power(radio)
        precoder = rzf_precode(channel, noise, site.tx_power_w)
        gains = effective_gains(channel, precoder)
        allocation = maxmin_power(gains, noise, site.tx_power_w)
        rates = user_rates(allocation, gains, radio, noise)

        out_dir = resolved.out_dir
        matrix_path, users_path = write_channel_csv(
            channel, out_dir / "channel.csv", config, seed
        )
        write_json_artifact(
            out_dir / "channel_summary.json",
            {
                "num_antennas": channel.num_antennas,
                "num_users": channel.num_users,
                "noise_power_w": noise,
                "rzf_alpha": precoder.alpha,
                "powers_w": allocation.p,
                "common_sinr_db": 10 * np.log10(allocation.common_sinr),
                "sinr_db": 10 * np.log10(rates.sinr),
                "rate_bps": rates.rate_bps,
                "target_rate_bps": radio.target_rate_bps,
            },
            config,
            seed,
        )

        satisfied = int(np.count_nonzero(rates.rate_bps >= radio.target_rate_bps))
        self.stdout.write(
            f"M={channel.num_antennas} K={channel.num_users}: "
            f"common SINR {10 * np.log10(allocation.common_sinr):.2f} dB, "
            f"{satisfied}/{channel.num_users} users at target rate"
        )
        self.stdout.write(
            self.style.SUCCESS(f"Channel written to {matrix_path} and {users_path}")
        )
