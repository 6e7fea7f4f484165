"""Writes the bundled fixtures and an independent expectation file for each.

The expectations are worked out here by plain interval arithmetic, without
the simulator, and the Rust tests compare against them.
"""

import csv
import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"
PHASES = ["SWA", "SWOA", "PROC", "REV"]


def hm(t):
    return f"{int(t) // 60:02d}:{int(t) % 60:02d}"


def m(s):
    h, mm = s.split(":")
    return int(h) * 60 + int(mm)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


CASE_HEADER = ["case_id", "case_type", "surgeon_id", "planned_room", "sequence_index", "planned_start",
               "arrival_time", "preoperative_minutes", "realized_room", "realized_start"]
DUR_HEADER = ["case_id", "phase", "kind", "p1", "p2", "p3", "realized_minutes"]


def duration_rows(cid, planned, realized, spread):
    rows = []
    for i, ph in enumerate(PHASES):
        r = "" if realized is None else realized[i]
        if ph == "PROC" and spread:
            rows.append([cid, ph, "triangular", planned[i] - spread, planned[i], planned[i] + spread, r])
        else:
            rows.append([cid, ph, "deterministic", planned[i], "", "", r])
    return rows


def kpis(rooms, placed):
    """placed: list of (room, start, total). Returns utilization, overtime, per room."""
    shift_total = sum(e - s for _, s, e in rooms)
    busy = 0
    over = 0
    per = {}
    for rid, s, e in rooms:
        mine = [(st, st + d) for r, st, d in placed if r == rid and d > 0]
        b = sum(max(0, min(en, e) - max(st, s)) for st, en in mine)
        last = max((en for _, en in mine), default=None)
        o = max(0, last - e) if last is not None else 0
        busy += b
        over += o
        per[rid] = {"busy_in_shift": b, "overtime_minutes": o}
    return busy / shift_total, over / shift_total, per


def max_anesth(intervals):
    pts = sorted({s for s, _ in intervals})
    return max((sum(1 for s, e in intervals if s <= p < e) for p in pts), default=0)


def overtime_day():
    out = ROOT / "overtime_day"
    out.mkdir(parents=True, exist_ok=True)
    rooms = [(f"OR{i}", m("08:00"), m("16:00")) for i in range(1, 7)]
    # room -> list of (case_id, surgeon, planned phases, realized phases, triangular spread)
    plan = {
        "OR1": [("C01", "S1", [15, 10, 120, 15], None, 20),
                ("C02", "S1", [15, 10, 150, 15], [15, 10, 250, 15], 30),
                ("C03", "S1", [15, 10, 90, 10], [15, 10, 135, 10], 20)],
        "OR2": [("C04", "S2", [15, 10, 60, 15], None, 10),
                ("C05", "S2", [15, 10, 45, 10], None, 10),
                ("C06", "S2", [15, 10, 35, 10], None, 5)],
        "OR3": [("C07", "S3", [15, 10, 90, 15], None, 15),
                ("C08", "S3", [15, 10, 60, 15], None, 15),
                ("C09", "S3", [15, 10, 45, 15], None, 10),
                ("C10", "S3", [15, 10, 60, 15], None, 15)],
        "OR4": [("C11", "S4", [15, 10, 90, 15], None, 20),
                ("C12", "S4", [15, 10, 80, 15], None, 20),
                ("C13", "S2", [15, 10, 70, 10], None, 10),
                ("C14", "S4", [15, 10, 45, 10], None, 10)],
        "OR5": [("C15", "S5", [15, 10, 120, 15], None, 30),
                ("C16", "S5", [15, 10, 100, 15], None, 20),
                ("C17", "S5", [15, 10, 75, 15], None, 15)],
        "OR6": [("C18", "S6", [15, 10, 150, 15], None, 30),
                ("C19", "S6", [15, 10, 75, 15], None, 15),
                ("C20", "S6", [15, 10, 60, 15], None, 10)],
    }
    # Rooms 4-6 open their first case a quarter hour later so that no more
    # than three setups with anesthesia ever run at once.
    first_start = {"OR1": 480, "OR2": 480, "OR3": 480, "OR4": 495, "OR5": 495, "OR6": 495}
    anesth = 3

    plan_rows, plan_durs, perf_rows, perf_durs = [], [], [], []
    placed_plan, placed_perf, swa_plan, swa_perf = [], [], [], []
    proc_by_surgeon = {}
    for rid, cases in plan.items():
        t_plan = first_start[rid]
        t_perf = first_start[rid]
        for seq, (cid, sid, ph, real, spread) in enumerate(cases):
            real = real or ph
            plan_rows.append([cid, "elective", sid, rid, seq, hm(t_plan), "", "", "", ""])
            perf_rows.append([cid, "elective", sid, rid, seq, hm(t_plan), "", "", rid, hm(max(t_plan, t_perf))])
            plan_durs += duration_rows(cid, ph, None, spread)
            perf_durs += duration_rows(cid, ph, real, spread)
            start = max(t_plan, t_perf)
            placed_plan.append((rid, t_plan, sum(ph)))
            placed_perf.append((rid, start, sum(real)))
            swa_plan.append((t_plan, t_plan + ph[0]))
            swa_perf.append((start, start + real[0]))
            ps = start + real[0] + real[1]
            proc_by_surgeon.setdefault(sid, []).append((ps, ps + real[2], rid))
            t_plan += sum(ph)
            t_perf = start + sum(real)
    assert max_anesth(swa_plan) <= anesth and max_anesth(swa_perf) <= anesth
    for sid, procs in proc_by_surgeon.items():
        procs.sort()
        for a, b in zip(procs, procs[1:]):
            assert a[1] <= b[0], (sid, a, b)

    last_end = {r: max(s + d for rr, s, d in placed_perf if rr == r) for r, _, _ in rooms}
    urgent = [("U1", "S7", "16:30", 60, [10, 5, 60, 15], "OR3"),
              ("U2", "S8", "17:00", 60, [10, 5, 60, 15], "OR2")]
    urgent_ready = {}
    for cid, sid, arr, preop, ph, real_room in urgent:
        ready = m(arr) + preop
        urgent_ready[cid] = ready
        perf_rows.append([cid, "non_elective", sid, "", "", "", arr, preop, real_room, hm(ready)])
        perf_durs += duration_rows(cid, ph, ph, 0)

    # Expected placements. Every shift is over at both ready times, so no
    # room has non-negative slack: BF and WF fall back to the earliest
    # completion, which is the lowest-index room idle at the ready time,
    # exactly the first-fit choice.
    free = dict(last_end)
    heuristic = {}
    for cid, _, _, _, ph, _ in urgent:
        ready = urgent_ready[cid]
        idle = [r for r, _, _ in rooms if free[r] <= ready]
        room = idle[0]
        heuristic[cid] = room
        free[room] = ready + sum(ph)

    def with_urgent(assign):
        placed = list(placed_perf)
        for cid, _, _, _, ph, _ in urgent:
            placed.append((assign[cid], urgent_ready[cid], sum(ph)))
        return kpis(rooms, placed)

    real_life = {cid: rr for cid, _, _, _, _, rr in urgent}
    u_real, o_real, _ = with_urgent(real_life)
    u_heur, o_heur, per = with_urgent(heuristic)
    assert (u_real, o_real) == (u_heur, o_heur)
    u_plan, o_plan, _ = kpis(rooms, placed_plan)

    write_csv(out / "rooms.csv", ["room_id", "shift_start", "shift_end"], [[r, hm(s), hm(e)] for r, s, e in rooms])
    write_csv(out / "cases.csv", CASE_HEADER, perf_rows)
    write_csv(out / "durations.csv", DUR_HEADER, perf_durs)
    write_csv(out / "plan_cases.csv", CASE_HEADER, plan_rows)
    write_csv(out / "plan_durations.csv", DUR_HEADER, plan_durs)
    resources = {"anesthesiologist_count": anesth, "enforce_anesth_capacity": True,
                 "enforce_surgeon_exclusivity": True}
    arrivals = {
        "rate_per_hour": 0.25,
        "window": ["08:00", "16:00"],
        "templates": [
            {"weight": 2.0, "preoperative": {"kind": "deterministic", "p1": 60.0},
             "phases": {"setup_with_anesth": {"kind": "deterministic", "p1": 10.0},
                        "setup_without_anesth": {"kind": "deterministic", "p1": 5.0},
                        "procedure": {"kind": "triangular", "p1": 45.0, "p2": 60.0, "p3": 90.0},
                        "reversal": {"kind": "deterministic", "p1": 15.0}},
             "surgeon_id": "S7"},
            {"weight": 1.0, "preoperative": {"kind": "lognormal", "p1": 3.4, "p2": 0.3},
             "phases": {"setup_with_anesth": {"kind": "deterministic", "p1": 15.0},
                        "setup_without_anesth": {"kind": "deterministic", "p1": 10.0},
                        "procedure": {"kind": "lognormal", "p1": 4.5, "p2": 0.25},
                        "reversal": {"kind": "deterministic", "p1": 15.0}},
             "surgeon_id": "S8"},
        ],
        "arrival_replications": 50,
    }
    config = {
        "format_version": "1",
        "scenario_id": "overtime-day",
        "schedule_kind": "performed",
        "tables": {"rooms": "rooms.csv", "cases": "cases.csv", "durations": "durations.csv"},
        "provisional_tables": {"rooms": "rooms.csv", "cases": "plan_cases.csv", "durations": "plan_durations.csv"},
        "resources": resources,
        "options": {"strategy": "real_life"},
        "targets": {"utilization_target": 0.85, "overtime_max": 0.05},
        "arrivals": arrivals,
        "seed": 0,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    plan_config = {
        "format_version": "1",
        "scenario_id": "overtime-day-plan",
        "schedule_kind": "provisional",
        "tables": {"rooms": "rooms.csv", "cases": "plan_cases.csv", "durations": "plan_durations.csv"},
        "resources": resources,
        "options": {"strategy": "first_fit", "replications": 1000},
        "targets": {"utilization_target": 0.85, "overtime_max": 0.05},
        "arrivals": arrivals,
        "seed": 0,
    }
    (out / "plan.json").write_text(json.dumps(plan_config, indent=2) + "\n")
    expected = {
        "rooms": len(rooms),
        "cases": len(perf_rows),
        "electives": len(plan_rows),
        "real_life": real_life,
        "heuristic": heuristic,
        "utilization": u_heur,
        "overtime": o_heur,
        "overtime_minutes_by_room": {r: v["overtime_minutes"] for r, v in per.items()},
        "plan_utilization": u_plan,
        "plan_overtime": o_plan,
        "last_elective_end": {r: hm(v) for r, v in last_end.items()},
    }
    (out / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    return expected


def open_slot():
    out = ROOT / "open_slot"
    out.mkdir(parents=True, exist_ok=True)
    rooms = [("R1", m("08:00"), m("14:00")), ("R2", m("08:00"), m("16:00")), ("R3", m("08:00"), m("16:00"))]
    electives = [
        ("E1", "S1", "R1", 0, "08:00", [15, 10, 200, 15]),  # R1 idle from 12:00
        ("E2", "S2", "R2", 0, "08:00", [15, 10, 260, 15]),  # R2 free at 13:00
        ("E3", "S3", "R3", 0, "08:00", [15, 10, 200, 15]),
        ("E4", "S3", "R3", 1, "12:00", [15, 10, 170, 15]),  # R3 busy to 15:30
    ]
    urgent = ("U1", "S4", "12:00", 60, [10, 5, 60, 15], "R3")
    rows, durs, placed = [], [], []
    for cid, sid, rid, seq, start, ph in electives:
        rows.append([cid, "elective", sid, rid, seq, start, "", "", rid, start])
        durs += duration_rows(cid, ph, ph, 0)
        placed.append((rid, m(start), sum(ph)))
    free = {}
    for rid, s, d in placed:
        assert s >= free.get(rid, 0), (rid, s)
        free[rid] = max(free.get(rid, 0), s + d)
    cid, sid, arr, preop, ph, real_room = urgent
    ready = m(arr) + preop
    rows.append([cid, "non_elective", sid, "", "", "", arr, preop, real_room, hm(max(ready, free[real_room]))])
    durs += duration_rows(cid, ph, ph, 0)

    busy = sum(ph)
    evals = []
    for rid, _, end in rooms:
        est = max(ready, free[rid])
        evals.append((rid, free[rid], est, est + busy, end - (est + busy)))
    ff = next(r for r, f, _, _, _ in evals if f <= ready)
    fitting = [(sl, i, r) for i, (r, _, _, _, sl) in enumerate(evals) if sl >= 0]
    bf = min(fitting)[2]
    wf = max(fitting, key=lambda x: (x[0], -x[1]))[2]

    def kpi_with(room):
        start = max(ready, free[room])
        return kpis(rooms, placed + [(room, start, busy)])

    write_csv(out / "rooms.csv", ["room_id", "shift_start", "shift_end"], [[r, hm(s), hm(e)] for r, s, e in rooms])
    write_csv(out / "cases.csv", CASE_HEADER, rows)
    write_csv(out / "durations.csv", DUR_HEADER, durs)
    config = {
        "format_version": "1",
        "scenario_id": "open-slot",
        "schedule_kind": "performed",
        "tables": {"rooms": "rooms.csv", "cases": "cases.csv", "durations": "durations.csv"},
        "resources": {"anesthesiologist_count": 3, "enforce_anesth_capacity": True},
        "seed": 0,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    expected = {
        "ready": hm(ready),
        "first_fit": ff,
        "best_fit": bf,
        "worst_fit": wf,
        "slack": {r: sl for r, _, _, _, sl in evals},
        "overtime_first_fit": kpi_with(ff)[1],
        "overtime_best_fit": kpi_with(bf)[1],
        "utilization_first_fit": kpi_with(ff)[0],
        "utilization_best_fit": kpi_with(bf)[0],
    }
    (out / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    return expected


if __name__ == "__main__":
    print(json.dumps(overtime_day(), indent=2))
    print(json.dumps(open_slot(), indent=2))
