#!/usr/bin/env python3
"""Regenerates the bundled phantom models, BMD field and scenarios under data/."""
import json
import math
import pathlib

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"

# Superellipse body outline, 1.5x an adult L3 axial section.
A, B, CY, N, VERTS = 37.5, 28.5, 42.5, 4.0, 96


def outline():
    pts = []
    for k in range(VERTS):
        t = 2 * math.pi * k / VERTS
        c, s = math.cos(t), math.sin(t)
        x = A * math.copysign(abs(c) ** (2 / N), c)
        y = CY + B * math.copysign(abs(s) ** (2 / N), s)
        pts.append([round(x, 6), round(y, 6)])
    return pts


def axis(heading_deg):
    a = math.radians(heading_deg)
    return [round(math.sin(a), 12), round(math.cos(a), 12), 0.0]


def corridor(side, entry, heading):
    return {"side": side, "entry": entry, "axis": axis(heading), "radius": 4.0, "length": 20.0}


def model(name, corridors):
    return {
        "format": "absf-model/1",
        "name": name,
        "frame": "phantom",
        "scale": 1.5,
        "height": 42.0,
        "axial_section": outline(),
        "corridors": corridors,
        # Fields not readable from the published phantom drawing.
        "estimated": ["axial_section", "height", "corridors.entry", "corridors.axis",
                      "corridors.length"],
    }


def write(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def main():
    write(DATA / "models" / "phantom_s1.json", model("phantom-s1", [
        corridor("left", [-19.66, 0.0, 0.0], 6.3),
        corridor("right", [19.6595, 0.7713, 0.0], -6.3),
    ]))
    write(DATA / "models" / "phantom_s2.json", model("phantom-s2", [
        corridor("left", [-5.96, 0.0, 0.0], -6.084),
        corridor("right", [5.96, 0.0, 0.0], 6.084),
    ]))
    write(DATA / "bmd" / "phantom_bmd.json", {
        "format": "absf-bmd/1",
        "origin": [-45.0, -5.0, -25.0],
        "spacing": [2.5, 2.5, 2.5],
        "dims": [37, 35, 21],
        "synthetic": {
            "base": 0.2,
            "ellipsoids": [
                {"center": [0.0, 42.5, 0.0], "radii": [30.0, 22.0, 17.0], "value": 0.16},
            ],
            "blocks": [],
        },
    })

    common = {
        "format": "absf-scenario/1",
        "bmd_path": "../bmd/phantom_bmd.json",
        "repeats": 3,
        "tracker_pose": {"euler_zyx_deg": [12.0, -4.0, 3.0], "translation": [110.0, -35.0, 60.0]},
        "metrology": {"icp_max_iter": 100, "target_step_mm": 0.1, "tau_min_mm": 0.3, "k": 5,
                      "min_prefix": 10, "tail_exclude": 2},
        "fps": {"l_r_mm": 18.0, "l_f_mm": 54.4, "od_mm": 7.0, "id_mm": 4.0, "pitch_mm": 2.5},
        "injection": {"pressure_pa": 4.0e5, "viscosity_pa_s": 14.0, "tube_inner_radius_mm": 0.5,
                      "tube_length_mm": 100.0, "fill_radius_mm": 2.0, "dt_s": 0.5},
    }
    s1 = dict(common)
    s1.update({
        "name": "S1",
        "description": "Straight-Curved bridge",
        "model_path": "../models/phantom_s1.json",
        "sides": {
            "left": {"kind": "Curved", "corridor": "left", "bend": "medial", "alpha_deg": 6.3,
                     "slide_mm": 0.0, "l_ot": 28.5, "l_it": 42.5, "r": 25.0},
            "right": {"kind": "Straight", "corridor": "right", "bend": "medial",
                      "alpha_deg": [-10.3, -2.3], "slide_mm": 0.0, "l_ot": [40.0, 60.0]},
        },
        "planner": {"eps_meet_mm": 1.0, "theta_range_deg": [105.0, 115.0], "r_min_mm": 10.0,
                    "bmd_min": 0.1},
        "sim": {"feed_mm_s": 2.0, "rpm_drill": 6000, "rpm_retract": 1000, "dt_s": 0.25,
                "noise_sigma_mm": 0.5, "springback": 1.074},
    })
    s2 = dict(common)
    s2.update({
        "name": "S2",
        "description": "Curved-Curved bridge",
        "model_path": "../models/phantom_s2.json",
        "sides": {
            "left": {"kind": "Curved", "corridor": "left", "bend": "medial",
                     "alpha_deg": [-10.084, -2.084], "slide_mm": 0.0, "l_ot": 36.6,
                     "l_it": 30.9, "r": 35.0},
            "right": {"kind": "Curved", "corridor": "right", "bend": "medial",
                      "alpha_deg": [2.084, 10.084], "slide_mm": 0.0, "l_ot": 36.6,
                      "l_it": 30.9, "r": 35.0},
        },
        "planner": {"eps_meet_mm": 1.0, "theta_range_deg": [84.0, 94.0], "r_min_mm": 10.0,
                    "bmd_min": 0.1},
        "sim": {"feed_mm_s": 2.0, "rpm_drill": 6000, "rpm_retract": 1000, "dt_s": 0.25,
                "noise_sigma_mm": 0.5, "springback": 1.096},
    })
    write(DATA / "scenarios" / "S1.json", s1)
    write(DATA / "scenarios" / "S2.json", s2)


if __name__ == "__main__":
    main()
