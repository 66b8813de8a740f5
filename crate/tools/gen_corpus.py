#!/usr/bin/env python3
"""One-off generator for the bundled fixture corpus under crates/core/fixtures/."""
import json
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "fixtures")
os.makedirs(OUT, exist_ok=True)

rng = random.Random(20260825)

FILLER_SUBJECTS = [
    "The coupling term", "A renormalized operator", "The effective Hamiltonian",
    "Each lattice site", "The measured spectrum", "A perturbative expansion",
    "The boundary condition", "This scattering channel", "The order parameter",
    "A mean-field treatment", "The correlation length", "Each simulated trajectory",
    "The numerical integrator", "A coarse-grained model", "The fitted curve",
]
FILLER_VERBS = [
    "exhibits", "suppresses", "enhances", "modulates", "stabilizes", "dominates",
    "constrains", "reproduces", "approximates", "saturates", "tracks", "obeys",
]
FILLER_OBJECTS = [
    "a narrow resonance near the Fermi level", "the low-temperature scaling regime",
    "an emergent symmetry of the reduced model", "the crossover between phases",
    "a weak logarithmic correction", "the asymptotic power-law tail",
    "a finite-size plateau in the observable", "the screened interaction strength",
    "a smooth interpolation between limits", "the predicted universal ratio",
]


def filler_sentence():
    return "%s %s %s." % (
        rng.choice(FILLER_SUBJECTS), rng.choice(FILLER_VERBS), rng.choice(FILLER_OBJECTS))


def keyword_sentences(keyword, topic, n):
    """Sentences that each contain `keyword` at least once."""
    templates = [
        "The {kw} of this work examines {topic} in detail.",
        "In this {kw} we outline how {topic} shapes the overall argument.",
        "A central theme of the {kw} is that {topic} admits a compact description.",
        "The {kw} further relates {topic} to previously reported observations.",
        "Readers of the {kw} will find that {topic} is treated quantitatively.",
        "This {kw} closes by connecting {topic} to the broader research program.",
        "Our {kw} emphasizes that {topic} remains robust under perturbations.",
        "The {kw} also situates {topic} within the existing literature.",
    ]
    out = []
    for i in range(n):
        out.append(templates[i % len(templates)].format(kw=keyword, topic=topic))
    return out


def section(header, kw_words, topic, kw_count, filler_count):
    sents = []
    for kw in kw_words:
        sents.extend(keyword_sentences(kw, topic, kw_count))
    for _ in range(filler_count):
        sents.append(filler_sentence())
    rngl = sents  # keep keyword sentences up front, filler after: deterministic order
    return header + "\n" + " ".join(rngl) + "\n\n"


def make_paper(title, topic, target_bytes):
    body = "Title: %s\n\n" % title
    body += section("1. Introduction", ["introduction"], topic, 8, 20)
    body += section("2. Core Contributions", ["contributions"], topic, 8, 20)
    body += section("3. Methodology", ["methodology"], topic, 8, 20)
    body += section("4. Analysis", ["analysis"], topic, 8, 20)
    body += section("5. Conclusions and Implications", ["conclusions", "implications"], topic, 6, 20)
    body += section("6. Future Work", ["future"], topic, 6, 20)
    # bulk the paper with appendix filler until the target size is reached
    body += "Appendix: Extended Derivations\n"
    while len(body.encode()) < target_bytes:
        body += " ".join(filler_sentence() for _ in range(12)) + "\n"
    return body


PAPERS = [
    ("p1.txt", "Multi-scale competition in the Majorana-Kondo system",
     "the interplay of Kondo screening and Majorana bound states", 140_000),
    ("p2.txt", "Chondrule formation by collisions of planetesimals containing volatiles triggered by Jupiter's formation",
     "volatile-driven planetesimal collisions in the early solar nebula", 82_000),
    ("p3.txt", "Resolving the flat-spectrum conundrum: clumpy aerosol distributions in sub-Neptune atmospheres",
     "patchy aerosol coverage in transmission spectra of sub-Neptunes", 108_000),
]

manifest = {"documents": []}

for path, title, topic, target in PAPERS:
    body = make_paper(title, topic, target)
    with open(os.path.join(OUT, path), "w") as f:
        f.write(body)
    manifest["documents"].append({
        "title": title, "kind": "paper", "path": path,
        "size_bytes": len(body.encode()),
    })

# ---- logs ----

def gen_apache(n_lines):
    lines = []
    t = 1133664000  # Sun Dec 04 2005 ~ 00:00 UTC
    import datetime
    for i in range(n_lines):
        t += rng.randint(1, 9)
        dt = datetime.datetime.fromtimestamp(t, datetime.timezone.utc)
        stamp = dt.strftime("[%a %b %d %H:%M:%S %Y]")
        if i % 8 == 7:
            lines.append("%s [notice] jk2_init() Found child %d in scoreboard slot %d"
                         % (stamp, 1500 + i, i % 10))
        else:
            lines.append("%s [error] mod_jk child workerEnv in error state %d"
                         % (stamp, 6 + (i % 3)))
    return "\n".join(lines) + "\n"


def gen_hadoop(n_lines):
    lines = []
    t = 1445191200  # 2015-10-18
    import datetime
    for i in range(n_lines):
        t += rng.randint(1, 6)
        dt = datetime.datetime.fromtimestamp(t, datetime.timezone.utc)
        stamp = dt.strftime("%Y-%m-%d %H:%M:%S") + ",%03d" % (i % 1000)
        if i % 7 == 6:
            lines.append("%s INFO [main] org.apache.hadoop.mapreduce.v2.app.MRAppMaster: Created MRAppMaster"
                         % stamp)
        else:
            lines.append("%s ERROR [RMCommunicator] org.apache.hadoop.yarn.client: Error communicating with RM: container_%d"
                         % (stamp, 100000 + i))
    return "\n".join(lines) + "\n"


def gen_openssh(n_lines):
    lines = []
    t = 1702190146  # Dec 10 2023
    import datetime
    for i in range(n_lines):
        t += rng.randint(1, 7)
        dt = datetime.datetime.fromtimestamp(t, datetime.timezone.utc)
        stamp = dt.strftime("%b %d %Y %H:%M:%S")
        if i % 9 == 8:
            lines.append("%s LabSZ sshd[%d]: Connection closed by 103.99.0.122 [preauth]"
                         % (stamp, 24200 + i % 50))
        else:
            lines.append("%s LabSZ sshd[%d]: Failed password for invalid user admin%d from 52.80.34.%d port %d ssh2"
                         % (stamp, 24200 + i % 50, i % 100, i % 255, 30000 + i % 9999))
    return "\n".join(lines) + "\n"


LOGS = [
    ("apache.log", gen_apache(8200), "[%a %b %d %H:%M:%S %Y]", "error state"),
    ("hadoop.log", gen_hadoop(7800), "%Y-%m-%d %H:%M:%S,%3f", "ERROR"),
    ("openssh.log", gen_openssh(8000), "%b %d %Y %H:%M:%S", "Failed password"),
]

for path, body, fmt, keyword in LOGS:
    with open(os.path.join(OUT, path), "w") as f:
        f.write(body)
    manifest["documents"].append({
        "title": path, "kind": "log", "path": path,
        "size_bytes": len(body.encode()),
        "timestamp_format": fmt, "keyword": keyword,
    })

with open(os.path.join(OUT, "manifest.json"), "w") as f:
    json.dump(manifest, f, indent=2)
    f.write("\n")

for d in manifest["documents"]:
    print(d["path"], d["size_bytes"])
