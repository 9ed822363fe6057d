"""
Closed-loop scenario runs: depth camera -> tracker -> withdrawal -> plant.

Tracking runs once per ``cycle_period`` with the plant stepped in between;
withdrawal runs at the physics rate. One CSV row is written per tracking
cycle and per ``cycle_period`` of withdrawal.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from apps.cloud.camera import render_depth
from apps.cloud.pointcloud import write_xyz
from apps.core.logging.logging_utils import log_execution_time, run_log
from apps.geom.kinematics import camera_pose
from apps.harness.models import SimulationRun
from apps.harness.scenario import Expectation, Scenario, load_scenario
from apps.simworld.actuators import PlantCommand
from apps.simworld.services import PlantSimulator
from apps.tracker.services import TrackerPhase, TrackerState, tracker_step
from apps.withdraw.services import WithdrawController, plan_withdraw

logger = logging.getLogger("apps.harness.services")

CSV_COLUMNS = [
    "time_s",
    "phase",
    "delta_tilt_deg",
    "delta_height_m",
    "fork_tilt_meas_deg",
    "fork_tilt_ref_deg",
    "fork_height_m",
    "limit_switch",
    "pallet_pitch_deg",
    "pallet_x_m",
    "surface_tilt_deg",
    "icp_error_m",
    "icp_iters",
]
WITHDRAW_PHASE = "Withdraw"
# Height tracking is scored once the chassis has backed off this far.
TRACKING_TRANSIENT = 0.1


class RunOutcome(str, enum.Enum):
    WITHDRAW_COMPLETED = "WithdrawCompleted"
    HALTED_TIMEOUT = "HaltedTimeout"
    JAM_FAULT = "JamFault"


@dataclass(frozen=True)
class RunReport:
    scenario: str
    outcome: RunOutcome
    final_fork_tilt: float
    max_drag: float
    cycles: int
    converged_delta_tilt: float
    max_withdraw_tracking_error: float = 0.0
    seed: int = 0
    mode: str = ""
    sim_time: float = 0.0
    final_surface_tilt: float = 0.0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        """JSON-ready form, angles in degrees"""
        data = asdict(self)
        data["outcome"] = self.outcome.value
        data["passed"] = self.passed
        for key in ("final_fork_tilt", "converged_delta_tilt", "final_surface_tilt"):
            data[f"{key}_deg"] = float(np.degrees(data.pop(key)))
        return data


@dataclass
class RunResult:
    report: RunReport
    log: pd.DataFrame
    csv_path: Optional[Path] = None


def render_seed(seed: int, cycle: int) -> int:
    """Independent, reproducible noise stream per cycle"""
    return int(np.random.SeedSequence([seed, cycle]).generate_state(1)[0])


def write_csv(log: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    log.to_csv(path, index=False, float_format="%.6f", lineterminator="\n", na_rep="nan")
    return path


def check_expectations(report: RunReport, expect: Expectation) -> List[str]:
    """Human readable list of unmet expectations"""
    failures = []
    if expect.outcome is not None and report.outcome.value != expect.outcome:
        failures.append(f"outcome {report.outcome.value} != {expect.outcome}")
    if expect.final_tilt is not None:
        error = abs(report.final_fork_tilt - expect.final_tilt)
        if error > expect.tilt_tolerance:
            failures.append(
                f"final tilt {np.degrees(report.final_fork_tilt):.3f} deg is "
                f"{np.degrees(error):.3f} deg from {np.degrees(expect.final_tilt):.3f} deg"
            )
    if expect.max_drag_below is not None and report.max_drag > expect.max_drag_below:
        failures.append(f"drag {report.max_drag:.4f} m > {expect.max_drag_below:.4f} m")
    if expect.max_drag_above is not None and report.max_drag <= expect.max_drag_above:
        failures.append(f"drag {report.max_drag:.4f} m <= {expect.max_drag_above:.4f} m")
    if (
        expect.converged_delta_tilt_below is not None
        and abs(report.converged_delta_tilt) > expect.converged_delta_tilt_below
    ):
        failures.append(
            f"delta tilt at handoff {np.degrees(report.converged_delta_tilt):.3f} deg "
            f"> {np.degrees(expect.converged_delta_tilt_below):.3f} deg"
        )
    if (
        expect.tracking_error_below is not None
        and report.max_withdraw_tracking_error > expect.tracking_error_below
    ):
        failures.append(
            f"withdraw tracking error {report.max_withdraw_tracking_error:.4f} m "
            f"> {expect.tracking_error_below:.4f} m"
        )
    return failures


class ScenarioRun:
    """One closed-loop run; owns the plant, the tracker state and the log rows"""

    def __init__(self, scenario: Scenario, dump_clouds: Optional[Union[str, Path]] = None):
        self.scenario = scenario
        self.sim = PlantSimulator.from_model(
            scenario.plant,
            dt=scenario.physics_dt,
            pallet_rear_x=scenario.pallet_rear_x,
            initial_gap=scenario.initial_gap,
            reach=scenario.reach,
        )
        self.tracker = TrackerState()
        self.rows: List[dict] = []
        self.dump_clouds = Path(dump_clouds) if dump_clouds else None
        self.tracking_error = 0.0

    def _row(self, phase, delta_tilt, delta_height, tilt_ref, icp_error, icp_iters) -> dict:
        world = self.sim.state
        return {
            "time_s": world.time,
            "phase": phase,
            "delta_tilt_deg": np.degrees(delta_tilt),
            "delta_height_m": delta_height,
            "fork_tilt_meas_deg": np.degrees(world.fork.tilt),
            "fork_tilt_ref_deg": np.degrees(tilt_ref),
            "fork_height_m": world.fork.height,
            "limit_switch": int(world.fork.limit_switch),
            "pallet_pitch_deg": np.degrees(world.pallet.pitch),
            "pallet_x_m": world.pallet.x,
            "surface_tilt_deg": np.degrees(world.surface_tilt),
            "icp_error_m": icp_error,
            "icp_iters": icp_iters,
        }

    def _timed_out(self) -> bool:
        return self.sim.state.time >= self.scenario.duration_limit - 1e-9

    def _measure(self):
        scn = self.scenario
        cfg = self.sim.fork.apply_to(scn.tracker.kinematics)
        camera = scn.camera.with_pose(camera_pose(cfg))
        cloud = render_depth(self.sim.scene(), camera, render_seed(scn.seed, self.tracker.cycle))
        if self.dump_clouds is not None:
            write_xyz(cloud, self.dump_clouds / f"cycle_{self.tracker.cycle:04d}.xyz")
        return cloud

    def track(self) -> Optional[RunOutcome]:
        """Tracking cycles until the tracker hands over, halts or the plant jams"""
        scn = self.scenario
        while True:
            if self.sim.jammed:
                return RunOutcome.JAM_FAULT
            if self._timed_out():
                return RunOutcome.HALTED_TIMEOUT

            commands, self.tracker = tracker_step(
                self.tracker, self._measure(), self.sim.fork, scn.tracker
            )
            state = self.tracker
            self.rows.append(
                self._row(
                    state.phase.value,
                    state.last_delta_tilt,
                    state.last_delta_height,
                    state.ref_tilt,
                    state.icp_error,
                    state.icp_iterations,
                )
            )
            if state.phase == TrackerPhase.HALTED:
                return RunOutcome.HALTED_TIMEOUT
            if state.phase == TrackerPhase.READY_TO_WITHDRAW:
                return None
            self.sim.advance(
                PlantCommand(tilt_ref=commands.tilt_ref, height_ref=commands.height_ref),
                steps=scn.steps_per_cycle,
            )

    def withdraw(self) -> RunOutcome:
        scn = self.scenario
        plan = plan_withdraw(
            self.sim.fork,
            kp_height=scn.withdraw.kp_height,
            back_speed=scn.withdraw.back_speed,
            target_distance=scn.withdraw.target_distance,
            fork_length=scn.plant.geometry.blade_length,
        )
        controller = WithdrawController(plan)
        start_x = self.sim.begin_withdraw()
        step = 0
        while True:
            if self.sim.jammed:
                return RunOutcome.JAM_FAULT
            if self._timed_out():
                return RunOutcome.HALTED_TIMEOUT

            odometry = start_x - self.sim.state.chassis_x
            height = self.sim.fork.height
            if odometry >= TRACKING_TRANSIENT:
                self.tracking_error = max(
                    self.tracking_error, controller.tracking_error(odometry, height)
                )
            commands = controller.step(odometry, height)
            if commands.done or (step and step % scn.steps_per_cycle == 0):
                self.rows.append(
                    self._row(WITHDRAW_PHASE, np.nan, np.nan, commands.tilt_ref, np.nan, 0)
                )
            if commands.done:
                return RunOutcome.WITHDRAW_COMPLETED
            if commands.fault:
                logger.error("Withdrawal aborted", extra={"data": {"fault": commands.fault}})
                return RunOutcome.JAM_FAULT

            self.sim.advance(
                PlantCommand(
                    tilt_ref=commands.tilt_ref,
                    height_rate=commands.height_rate_cmd,
                    drive=commands.drive_cmd,
                )
            )
            step += 1

    def execute(self) -> RunResult:
        outcome = self.track()
        if outcome is None:
            outcome = self.withdraw()

        scn = self.scenario
        world = self.sim.state
        report = RunReport(
            scenario=scn.name,
            outcome=outcome,
            final_fork_tilt=float(world.fork.tilt),
            max_drag=self.sim.drag(),
            cycles=self.tracker.cycle,
            converged_delta_tilt=float(self.tracker.last_delta_tilt),
            max_withdraw_tracking_error=float(self.tracking_error),
            seed=scn.seed,
            mode=scn.mode.value,
            sim_time=float(world.time),
            final_surface_tilt=float(world.surface_tilt),
        )
        report = replace(report, failures=check_expectations(report, scn.expect))
        return RunResult(report=report, log=pd.DataFrame(self.rows, columns=CSV_COLUMNS))


@log_execution_time(logger_name="performance", level=logging.INFO)
def run_scenario(
    scn: Scenario,
    csv_path: Optional[Union[str, Path]] = None,
    dump_clouds: Optional[Union[str, Path]] = None,
) -> RunResult:
    """
    Run one scenario to completion.

    A jam is reported as ``JamFault`` in the report, never raised.
    """
    result = ScenarioRun(scn, dump_clouds=dump_clouds).execute()
    if csv_path is not None:
        result.csv_path = write_csv(result.log, csv_path)

    report = result.report
    run_log(
        report.outcome.value,
        scenario=report.scenario,
        seed=report.seed,
        mode=report.mode,
        cycles=report.cycles,
        max_drag=report.max_drag,
        final_fork_tilt_deg=float(np.degrees(report.final_fork_tilt)),
        passed=report.passed,
    )
    return result


class ScenarioService:
    """Service layer used by the management commands"""

    @staticmethod
    def run(
        name: Union[str, Path],
        csv_path=None,
        seed: Optional[int] = None,
        dump_clouds=None,
    ) -> RunResult:
        scenario = load_scenario(name)
        if seed is not None:
            scenario = scenario.with_seed(seed)
        return run_scenario(scenario, csv_path=csv_path, dump_clouds=dump_clouds)

    @staticmethod
    def run_suite(
        names: Sequence[Union[str, Path]], csv_dir=None, seed: Optional[int] = None
    ) -> List[RunResult]:
        results = []
        for name in names:
            csv_path = None
            if csv_dir is not None:
                csv_path = Path(csv_dir) / f"{Path(name).stem}.csv"
            results.append(ScenarioService.run(name, csv_path=csv_path, seed=seed))
        return results

    @staticmethod
    def save(result: RunResult):
        """Persist a finished run"""
        return SimulationRun.from_result(result)
