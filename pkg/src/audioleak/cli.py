"""Command-line entry point: ``audioleak <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from . import devices
from .burst import BurstParams, detect_bursts, sweep_n
from .evaluation import DEFAULT_THRESHOLDS, burst_roc, scan_outcome, stat_sweep
from .ingest import CaptureSource, TailingPcapAdapter, ingest
from .model import ParameterError
from .serialize import bursts_to_json, load_labels, load_traces, save_labels, save_traces, write_pvalues
from .statprobe import DEFAULT_SCAN_WINDOW, DEFAULT_THRESHOLD, sliding_scan

log = logging.getLogger("audioleak")


def _write_json(doc, path) -> None:
    if path in (None, "-"):
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        with open(path, "w") as fp:
            json.dump(doc, fp, indent=2)


def cmd_ingest(args) -> int:
    traces, rep = ingest(CaptureSource.pcap(args.pcap, args.local_net), epoch_us=args.epoch_us)
    save_traces(traces, args.out)
    print(f"devices={rep.device_count} packets={rep.packet_count} dropped={rep.dropped} "
          f"span={rep.span[0]:.6f}..{rep.span[1]:.6f}" + (" truncated" if rep.truncated else ""))
    return 0


def cmd_detect_burst(args) -> int:
    traces = load_traces(args.traces)
    params = BurstParams(args.sw, args.baudio, args.n)
    events = [e for tr in traces.values() for e in detect_bursts(tr, params)]
    _write_json(bursts_to_json(events), args.out)
    print(f"{len(events)} burst event(s) on {len(traces)} device(s)", file=sys.stderr)
    if args.labels:
        pt = sweep_n(traces, load_labels(args.labels), params, (args.n, args.n), args.average)[0]
        print(f"n={pt.n} window TPR={pt.tpr:.4f} FPR={pt.fpr:.4f}  event TPR={pt.event_tpr:.4f} "
              f"FPR={pt.event_fpr:.4f}", file=sys.stderr)
    return 0


def cmd_stat_scan(args) -> int:
    traces = load_traces(args.traces)
    rows = []
    for dev in sorted(traces, key=lambda d: d.hardware_id):
        for r in sliding_scan(traces[dev], args.window, args.threshold, args.combine_iat):
            rows.append((dev, r))
    write_pvalues(rows, args.out)
    print(f"{len(rows)} window pair(s), {sum(r.reactive for _, r in rows)} reactive", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    from .simulator import simulate, write_pcap

    scenario = devices.load_scenario(args.scenario, args.seed)
    data = simulate(scenario)
    if args.pcap:
        write_pcap(data, args.pcap)
    if args.labels:
        save_labels(data.labels, args.labels)
    if args.traces:
        save_traces(data.traces, args.traces)
    print(f"{len(data.traces)} device(s), {sum(len(t) for t in data.traces.values())} packets, "
          f"{len(data.labels)} label(s)", file=sys.stderr)
    return 0


def cmd_probe(args) -> int:
    from .orchestrator import (AdapterCapture, CommandSink, MonotonicClock, judge, load_plan, report,
                               run_session, session_to_dict, simulated_session, verdict_to_dict)

    plan = load_plan(args.plan)
    if args.capture == "sim":
        fleet = [devices.device(n) for n in args.devices.split(",")] if args.devices else devices.fleet()
        session = simulated_session(plan, fleet, args.seed)
    else:
        if not args.follow or not args.player:
            raise ParameterError("live capture needs --follow <growing.pcap> and --player <command>")
        clock = MonotonicClock()
        capture = AdapterCapture(CaptureSource.live(TailingPcapAdapter(args.follow, idle_timeout=plan.window_d * 4),
                                                    args.local_net), clock)
        session = run_session(plan, CommandSink(args.player, clock), capture, clock)
    _write_json(session_to_dict(session), args.out)
    verdicts = judge(session, combine_iat=args.combine_iat)
    if args.verdicts:
        _write_json({"verdicts": [verdict_to_dict(v) for v in verdicts]}, args.verdicts)
    sys.stdout.write(report(verdicts, "text"))
    if session.partial:
        print(f"session partial: {session.error}", file=sys.stderr)
        return 3
    return 0


def cmd_fuzz(args) -> int:
    from .fuzzer import (SensorLogOracle, SimulatedOracle, candidates_for, fuzz_report, load_dictionary,
                         load_false_wakewords, run_campaign, select_candidates)

    counts = {int(x) for x in args.phonemes.split(",")} if args.phonemes else None
    probs = load_false_wakewords(args.probabilities)
    if args.dict:
        entries, prep = load_dictionary(args.dict)
        if prep.skipped:
            log.warning("skipped %d malformed dictionary line(s)", prep.skipped)
        cands = select_candidates(entries, args.target, counts=counts)
    else:
        cands = candidates_for(sorted(w for w in probs if w != args.target.lower()), args.target)
    if args.limit:
        cands = cands[:args.limit]
    if args.oracle == "sim":
        oracle = SimulatedOracle(probs, seed=args.seed, mode=args.mode)
    else:
        from .orchestrator import CommandSink, ProbeWord, WallClock

        if not (args.player and args.sensor_log and args.audio_dir):
            raise ParameterError("sensor-log oracle needs --player, --sensor-log and --audio-dir")
        sink = CommandSink(args.player, WallClock())
        oracle = SensorLogOracle(sink, lambda w: ProbeWord(w, f"{args.audio_dir}/{w}.wav"), args.sensor_log)
    results = run_campaign(cands, oracle, args.trials, args.cooldown)
    doc = fuzz_report(results, args.target, args.trials, args.min_activations)
    _write_json(doc, args.out)
    print(f"{len(results)} candidate(s), {len(doc['discovered'])} discovered", file=sys.stderr)
    return 0


def cmd_roc(args) -> int:
    traces = load_traces(args.input)
    labels = load_labels(args.labels)
    if args.mode == "burst":
        params = BurstParams(args.sw, args.baudio)
        curve = burst_roc(sweep_n(traces, labels, params, (args.n_min, args.n_max), args.average),
                          event_level=args.event_level)
    else:
        outcomes = []
        for dev, tr in traces.items():
            labs = [(l.start, l.end) for l in labels if l.device == dev]
            outcomes.append(scan_outcome(tr, labs, args.window, args.combine_iat))
        curve = stat_sweep(outcomes, DEFAULT_THRESHOLDS, args.average)
    curve.to_csv(args.out)
    print(f"{len(curve)} ROC point(s) written to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="audioleak", description="Detect audio transmissions in smart-device traffic.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def local_net(sp):
        sp.add_argument("--local-net", action="append", default=None, metavar="PREFIX",
                        help="LAN address prefix; repeatable (default 192.168.0.0/16)")

    sp = sub.add_parser("ingest", help="pcap -> traces.json")
    sp.add_argument("pcap")
    local_net(sp)
    sp.add_argument("--epoch-us", type=int, default=0, help="subtracted from frame timestamps")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("detect-burst", help="rate-threshold audio detector")
    sp.add_argument("traces")
    sp.add_argument("--sw", type=float, default=1.0)
    sp.add_argument("--baudio", type=float, default=23000.0)
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--labels")
    sp.add_argument("--average", choices=("micro", "macro"), default="micro")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_detect_burst)

    sp = sub.add_parser("stat-scan", help="sliding-window distribution test")
    sp.add_argument("traces")
    sp.add_argument("--window", type=float, default=DEFAULT_SCAN_WINDOW)
    sp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    sp.add_argument("--combine-iat", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_stat_scan)

    sp = sub.add_parser("probe", help="run a probing session and judge devices")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--capture", choices=("live", "sim"), default="sim")
    sp.add_argument("--out", required=True, help="session.json")
    sp.add_argument("--verdicts", help="verdicts.json")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--devices", help="comma-separated simulator model names (default: whole library)")
    sp.add_argument("--combine-iat", action="store_true")
    sp.add_argument("--follow", help="live mode: pcap file being written by a capture process")
    sp.add_argument("--player", help="live mode: player command, {audio} is replaced by the file")
    local_net(sp)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("simulate", help="generate synthetic traffic")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--pcap")
    sp.add_argument("--labels")
    sp.add_argument("--traces")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fuzz", help="wake-word fuzzing campaign")
    sp.add_argument("--dict", help="CMU-format pronouncing dictionary (default: the shipped result table's words)")
    sp.add_argument("--target", default="alexa")
    sp.add_argument("--phonemes", help="comma-separated phoneme counts, e.g. 5,6")
    sp.add_argument("--oracle", choices=("sim", "sensor-log"), default="sim")
    sp.add_argument("--mode", choices=("bernoulli", "replay"), default="bernoulli", help="simulated oracle mode")
    sp.add_argument("--probabilities", help="word<TAB>activations-of-10 table for the simulated oracle")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--min-activations", type=int, default=2)
    sp.add_argument("--cooldown", type=float, default=0.0)
    sp.add_argument("--limit", type=int, help="only the first N candidates")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--player")
    sp.add_argument("--sensor-log")
    sp.add_argument("--audio-dir")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_fuzz)

    sp = sub.add_parser("roc", help="ROC sweep to CSV")
    sp.add_argument("--mode", choices=("burst", "stat"), required=True)
    sp.add_argument("--in", dest="input", required=True, help="traces.json or session.json")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--average", choices=("micro", "macro"), default="micro")
    sp.add_argument("--sw", type=float, default=1.0)
    sp.add_argument("--baudio", type=float, default=23000.0)
    sp.add_argument("--n-min", type=int, default=1)
    sp.add_argument("--n-max", type=int, default=8)
    sp.add_argument("--event-level", action="store_true")
    sp.add_argument("--window", type=float, default=DEFAULT_SCAN_WINDOW)
    sp.add_argument("--combine-iat", action="store_true")
    sp.set_defaults(func=cmd_roc)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "local_net", "absent") is None:
        args.local_net = ["192.168.0.0/16"]
    try:
        return args.func(args)
    except (ParameterError, OSError, KeyError) as exc:
        print(f"audioleak: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
