"""Shared plumbing for the tower coverage management commands."""

import logging
from typing import Any, Dict, Optional

from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from tower_coverage.exceptions import TowerCoverageError
from tower_coverage.models import SimulationRun
from tower_coverage.runconfig import (
    ResolvedConfig,
    load_config_document,
    resolve_run_config,
)
from tower_coverage.utils import canonical_json, config_digest, make_executor

logger = logging.getLogger("tower_coverage.commands")


class RunCommand(BaseCommand):
    """
    Base for commands that resolve a run config and write artifacts.

    Subclasses implement `config_flags` (dotted config path -> option value)
    and `run`. Failures print one JSON line on stderr and exit with the
    error's code: 1 for input errors, 2 for numerical failures.
    """

    def add_arguments(self, parser: Any) -> None:
        parser.add_argument(
            "--config", type=str, help="JSON run config (flags override its keys)"
        )
        parser.add_argument("--seed", type=int, help="Master seed")
        parser.add_argument("--jobs", type=int, help="Worker processes")
        parser.add_argument("--out-dir", type=str, help="Artifact directory")
        parser.add_argument(
            "--no-record",
            action="store_true",
            help="Do not record the run in the database",
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser: Any) -> None:
        pass

    def config_flags(self, options: Dict[str, Any]) -> Dict[str, Any]:
        return {}

    def run(
        self,
        resolved: ResolvedConfig,
        executor: Any,
        record: Optional[SimulationRun],
        options: Dict[str, Any],
    ) -> None:
        raise NotImplementedError

    def handle(self, *args: Any, **options: Any) -> None:
        record = None
        try:
            flags = {
                "seed": options["seed"],
                "jobs": options["jobs"],
                "out_dir": options["out_dir"],
            }
            flags.update(self.config_flags(options))
            document = load_config_document(options["config"])
            resolved = resolve_run_config(document, flags)

            if not options["no_record"]:
                record = SimulationRun.objects.create(
                    command=self.command_name,
                    seed=resolved.seed,
                    config_json=canonical_json(resolved.config),
                    config_sha256=config_digest(resolved.config),
                    out_dir=str(resolved.out_dir),
                )
            logger.info(
                f"{self.command_name}: seed={resolved.seed} jobs={resolved.jobs} "
                f"out_dir={resolved.out_dir}"
            )

            with make_executor(resolved.jobs) as executor:
                self.run(resolved, executor, record, options)
            self.finish(record, "succeeded")

        except CommandError as e:
            # Raised by self.fail() inside run(); output already written
            self.finish(record, "failed", str(e))
            raise
        except TowerCoverageError as e:
            self.finish(record, "failed", str(e))
            self.fail(e.as_dict(), e.exit_code)
        except OSError as e:
            self.finish(record, "failed", str(e))
            self.fail(
                {"error": type(e).__name__, "message": str(e), "exit_code": 1}, 1
            )

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]

    def finish(
        self, record: Optional[SimulationRun], status: str, error: str = ""
    ) -> None:
        if record is None:
            return
        record.status = status
        record.error = error
        record.finished_at = timezone.now()
        record.save(update_fields=["status", "error", "finished_at"])

    def fail(self, payload: Dict[str, Any], exit_code: int) -> None:
        message = payload.get("message", "")
        logger.error(f"{self.command_name} failed: {message}")
        self.stderr.write(canonical_json(payload, indent=None))
        raise CommandError(message, returncode=exit_code)
