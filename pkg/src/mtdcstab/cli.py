"""Command-line driver: check stability, run the sensitivity workflow,
or emit synthetic test datasets.

Exit codes: 0 stable, 2 unstable, 1 any error.  Plot failures are
reported on stderr but never change the exit status.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import __version__, freqdata, network, synth, workflow
from .options import AnalysisOptions

EXIT_STABLE = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2


@dataclass(frozen=True)
class RunOptions:
    """CLI-level knobs: where to write, analysis thresholds, plot toggle.

    Threshold fields left as None inherit the manifest's options (or the
    built-in defaults); a flag given on the command line wins.
    """

    out_dir: Path
    delta: float | None = None
    prominence_db: float | None = None
    phase_window: int | None = None
    cond_limit: float | None = None
    grid_policy: str | None = None
    basis: str | None = None
    plots: bool = True
    merge_poles: bool = False

    def analysis_options(self, base: AnalysisOptions) -> AnalysisOptions:
        def pick(mine, theirs):
            return theirs if mine is None else mine

        return AnalysisOptions(
            grid_policy=pick(self.grid_policy, base.grid_policy),
            basis=pick(self.basis, base.basis),
            delta=pick(self.delta, base.delta),
            peak_prominence_db=pick(self.prominence_db, base.peak_prominence_db),
            phase_window=pick(self.phase_window, base.phase_window),
            cond_limit=pick(self.cond_limit, base.cond_limit),
            winding_tol=base.winding_tol,
            merge_poles=self.merge_poles or base.merge_poles,
        )


def _common_options(fn):
    fn = click.option("--out", "out_dir", type=click.Path(path_type=Path),
                      default=Path("."), show_default=True,
                      help="Output directory for report and plots.")(fn)
    fn = click.option("--delta", type=float, default=None,
                      help="Criticality threshold: distance to (-1, 0) [default 0.5].")(fn)
    fn = click.option("--prominence-db", type=float, default=None,
                      help="Peak prominence for the det(F) RHP-pole test [default 6].")(fn)
    fn = click.option("--phase-window", type=int, default=None,
                      help="Half width (points) of the phase-slope fit at peaks [default 3].")(fn)
    fn = click.option("--cond-limit", type=float, default=None,
                      help="Condition-number warning threshold for inversion [default 1e12].")(fn)
    fn = click.option("--basis", type=click.Choice(["current", "voltage"]),
                      default=None, help="Return-ratio basis [default current].")(fn)
    fn = click.option("--no-plots", "no_plots", is_flag=True, help="Skip SVG plots.")(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="mtdc-stab")
def main():
    """Impedance-based stability and root-cause analysis of DC networks."""


def _run_pipeline(manifest_path: Path, opts: RunOptions):
    manifest = network.load_manifest(manifest_path)
    manifest = network.SystemManifest(
        manifest.stations,
        manifest.cables,
        opts.analysis_options(manifest.options),
        manifest.sources,
    )
    return workflow.run_full_analysis(manifest), manifest


def _write_report(report, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def _render_plots(report, manifest, out_dir: Path, sense: bool):
    from . import plots  # deferred: pulls in matplotlib

    art = report.artifacts
    f_lo, f_hi = art.grid.span
    band = None
    if report.critical_loci:
        band = (
            min(c.f_lo for c in report.critical_loci),
            max(c.f_hi for c in report.critical_loci),
        )
    def plot_spec(kind):
        return plots.PlotSpec(kind, f_lo, f_hi, band)

    plots.bode_det_plot(art.detf, report.verdict.peaks, plot_spec("bode-det"),
                        out_dir / "bode_detF.svg")
    plots.nyquist_loci_plot(art.locus_set, report.critical_loci, plot_spec("nyquist-loci"),
                            out_dir / "nyquist_loci.svg")
    plots.bode_loci_plot(art.locus_set, plot_spec("bode-loci"), out_dir / "bode_loci.svg")
    if sense and report.has_sensitivity:
        plots.participation_plot(art.participation, report.critical_loci,
                                 manifest.port_map, plot_spec("participation"),
                                 out_dir / "participation.svg")
        plots.station_sensitivity_plot(art.sensitivities, report.critical_loci,
                                       manifest.port_map.station_names,
                                       plot_spec("station-sensitivity"),
                                       out_dir / "station_sensitivity.svg")


def _check_or_sense(manifest_path, opts: RunOptions, sense: bool) -> int:
    try:
        report, manifest = _run_pipeline(Path(manifest_path), opts)
        path = _write_report(report, opts.out_dir)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    if opts.plots:
        try:
            _render_plots(report, manifest, opts.out_dir, sense)
        except Exception as exc:  # plots are best-effort diagnostics
            click.echo(f"warning: plot generation failed: {exc}", err=True)
    verdict = report.verdict
    click.echo(
        f"P={verdict.p} N={verdict.n} -> {'stable' if verdict.stable else 'UNSTABLE'}"
        f" (report: {path})"
    )
    if sense:
        if report.has_sensitivity:
            top = report.station_ranking[0]
            click.echo(
                f"dominant station: {top['station']} ({top['pole']}), "
                f"score {top['score']:.4g}"
            )
        elif verdict.stable:
            click.echo(
                "no critical eigenloci: system is stable and far from (-1, 0); "
                "sensitivity analysis not needed"
            )
        else:
            click.echo(
                "unstable, but no eigenlocus comes within --delta of (-1, 0); "
                "raise --delta to enable sensitivity rankings"
            )
    return EXIT_STABLE if verdict.stable else EXIT_UNSTABLE


@main.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@_common_options
def check(manifest, out_dir, delta, prominence_db, phase_window, cond_limit, basis, no_plots):
    """Assess stability of the system described by MANIFEST."""
    opts = RunOptions(out_dir, delta, prominence_db, phase_window, cond_limit,
                      basis=basis, plots=not no_plots)
    sys.exit(_check_or_sense(manifest, opts, sense=False))


@main.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@_common_options
@click.option("--merge-poles", is_flag=True,
              help="Report one score per station (poles summed).")
def sense(manifest, out_dir, delta, prominence_db, phase_window, cond_limit, basis,
          no_plots, merge_poles):
    """Stability plus root-cause sensitivity rankings for MANIFEST."""
    opts = RunOptions(out_dir, delta, prominence_db, phase_window, cond_limit,
                      basis=basis, plots=not no_plots, merge_poles=merge_poles)
    sys.exit(_check_or_sense(manifest, opts, sense=True))


@main.command()
@click.argument("kind", type=click.Choice(["two", "four"]))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True,
              help="Directory to write the dataset into.")
@click.option("--unstable", is_flag=True, help="Two-terminal: use the unstable variant.")
@click.option("--destabilizer", type=click.IntRange(1, 4), default=None,
              help="Four-terminal: station index to destabilize.")
@click.option("--f-min", type=float, default=1.0, show_default=True)
@click.option("--f-max", type=float, default=100_000.0, show_default=True)
@click.option("--points-per-decade", type=int, default=400, show_default=True)
@click.option("--force", is_flag=True, help="Write into a non-empty directory.")
def synth_cmd(kind, out_dir, unstable, destabilizer, f_min, f_max, points_per_decade, force):
    """Emit a ready-to-analyze synthetic dataset (manifest + data files)."""
    try:
        if out_dir.exists() and any(out_dir.iterdir()) and not force:
            raise click.ClickException(
                f"output directory {out_dir} is not empty (use --force to overwrite)"
            )
        if kind == "two":
            system = synth.make_two_terminal(stable=not unstable)
        else:
            system = synth.make_four_terminal(destabilizer)
        grid = freqdata.log_grid(f_min, f_max, points_per_decade)
        manifest_path = synth.sample_system(system, grid, out_dir)
    except click.ClickException:
        raise
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"wrote {manifest_path}")


main.add_command(synth_cmd, name="synth")


if __name__ == "__main__":
    main()
