"""Builds the 200-document funnel fixture under pipeline200/.

Deterministic (fixed RNG seed). Writes the corpus (XML, txt and one tar.gz),
a license cache for every document without in-text license metadata, an NER
lexicon, the run config and ground_truth.json with the planted per-stage
counts.

The relevance ground truth is cross-checked here with an independent TF-IDF
computation: every planted relevant document must score above the configured
floor and every other document below it, with margin.

    python3 gen_pipeline_fixture.py
"""

import io
import json
import math
import random
import re
import shutil
import tarfile
from collections import Counter
from pathlib import Path

HERE = Path(__file__).resolve().parent
OUT = HERE / "pipeline200"
rng = random.Random(20240917)

TERMS = [
    "Lung Neoplasms",
    "Carcinoma, Non-Small-Cell Lung",
    "Small Cell Lung Carcinoma",
    "Adenocarcinoma of Lung",
    "Carcinoma, Bronchogenic",
]
MIN_SCORE = 0.42
THRESHOLD = 0.80

CC0 = "https://creativecommons.org/publicdomain/zero/1.0/"
XML_LICENSES = {
    "CC0": CC0,
    "CC_BY": "https://creativecommons.org/licenses/by/4.0/",
    "CC_BY_NC": "https://creativecommons.org/licenses/by-nc/4.0/",
    "OTHER": "https://publisher.example.org/terms",
}

# ---------------------------------------------------------------- lexicon

BIO = {
    "gefitinib": 0.97, "erlotinib": 0.96, "osimertinib": 0.97, "crizotinib": 0.95,
    "alectinib": 0.94, "cisplatin": 0.93, "pembrolizumab": 0.96, "nivolumab": 0.95,
    "egfr": 0.98, "kras": 0.97, "alk": 0.91, "tp53": 0.96, "stk11": 0.93, "keap1": 0.92,
    "met": 0.86, "erbb2": 0.95, "ros1": 0.94, "braf": 0.95, "pd": 0.83, "l1": 0.84,
    "tumor": 0.90, "metastasis": 0.92, "apoptosis": 0.91, "angiogenesis": 0.90,
    "proliferation": 0.88, "resistance": 0.85, "nephrotoxicity": 0.94, "neutropenia": 0.93,
    "pneumonitis": 0.95, "hypoxia": 0.87, "kinase": 0.89, "lymphocytes": 0.86,
    "marginal": 0.80,
}
LEXICON = {"default": 0.05, "terms": BIO}


def phrase_prob(phrase):
    toks = re.split(r"[^0-9a-z]+", phrase.lower())
    return max([BIO.get(t, LEXICON["default"]) for t in toks if t] or [LEXICON["default"]])


BIO_SUBJECTS = [
    "Gefitinib", "Erlotinib", "Osimertinib", "Crizotinib", "Alectinib", "Cisplatin",
    "Pembrolizumab", "Nivolumab", "EGFR kinase", "KRAS", "TP53 loss", "STK11 loss",
    "KEAP1 loss", "MET amplification", "ROS1 fusion", "BRAF", "PD-L1 expression",
]
BIO_OBJECTS = [
    "tumor proliferation", "brain metastasis", "apoptosis", "angiogenesis", "EGFR signaling",
    "acquired resistance", "nephrotoxicity", "neutropenia", "pneumonitis", "tumor hypoxia",
    "KRAS signaling", "lymphocytes", "ALK rearrangement", "ERBB2 signaling",
]
GENERIC = [
    "the cohort", "our team", "this workflow", "the registry", "many clinicians",
    "the protocol", "routine practice", "the survey",
]
VERBS = ["inhibits", "activates", "causes", "mediates", "confers", "encodes", "harbors"]

# sentences the naive extractor yields nothing for (no verb-like word)
FILLER = [
    "Background on {t} in a regional cohort.",
    "Summary of {t} outcomes over five years.",
    "Context: {t} and its histology.",
    "Scope of this {t} report.",
]


def svo(s, v, o):
    return f"{s} {v} {o}."


def bb(used):
    while True:
        t = (rng.choice(BIO_SUBJECTS), rng.choice(VERBS), rng.choice(BIO_OBJECTS))
        if t not in used:
            used.add(t)
            return t


def rejected(kind):
    v = rng.choice(VERBS)
    if kind == "bg":
        return (rng.choice(BIO_SUBJECTS), v, rng.choice(GENERIC))
    if kind == "gb":
        return (rng.choice(GENERIC).capitalize(), v, rng.choice(BIO_OBJECTS))
    if kind == "gg":
        return (rng.choice(GENERIC).capitalize(), v, rng.choice(GENERIC))
    # probability exactly at the threshold: strict `>` rejects it
    return (rng.choice(BIO_SUBJECTS), v, "marginal benefit")


def relevant_text(triplets):
    terms = rng.sample(TERMS, 3)
    sents = [FILLER[i].format(t=terms[i % 3].lower()) for i in range(3)]
    sents += [svo(*t) for t in triplets]
    sents.append(FILLER[3].format(t=terms[0].lower()))
    title = f"{terms[0]}: findings in {terms[1].lower()}"
    return title, sents


OFF_TOPICS = {
    "cardio": ["Atrial fibrillation burden in elderly adults.", "Heart failure admissions after discharge.",
               "Statin adherence in the community.", "Blood pressure variability at night.",
               "Coronary calcium scoring of outpatients."],
    "neuro": ["Migraine frequency in adolescents.", "Sleep spindles in memory consolidation.",
              "Gait speed of older adults.", "Cortical thickness of musicians.",
              "Seizure diaries of the clinic population."],
    "endo": ["Glycated hemoglobin targets in type 2 diabetes.", "Thyroid nodules in ultrasound screening.",
             "Insulin pump uptake in children.", "Vitamin D status of shift workers.",
             "Obesity trends of rural districts."],
    "decoy": ["Breast carcinoma cell lines in culture.", "Hepatocellular carcinoma surveillance intervals.",
              "Squamous cell lesions of the skin.", "Colorectal neoplasms in screening programmes.",
              "Small bowel imaging of a single centre."],
    "eco": ["Soil microbiome of alpine meadows.", "Pollinator visits in urban gardens.",
            "Coral bleaching of reef flats.", "Nitrogen runoff of farm catchments.",
            "Bird song of island populations."],
}


def off_topic_text():
    topic = rng.choice(sorted(OFF_TOPICS))
    sents = rng.sample(OFF_TOPICS[topic], 4)
    return f"Notes on {topic} research", sents


# ---------------------------------------------------------------- documents

def article_xml(doc):
    lic = ""
    if doc["xml_license"]:
        lic = (f'<permissions><license xlink:href="{XML_LICENSES[doc["xml_license"]]}">'
               f"<license-p>License statement.</license-p></license></permissions>")
    paras = "".join(f"<p>{s}</p>" for s in doc["sentences"])
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        '<article xmlns:xlink="http://www.w3.org/1999/xlink" article-type="research-article">\n'
        f'<front><article-meta><article-id pub-id-type="pmc">{doc["id"]}</article-id>'
        f'<title-group><article-title>{doc["title"]}</article-title></title-group>{lic}'
        "</article-meta></front>\n"
        f"<body><sec><title>Main</title>{paras}</sec></body>\n</article>\n"
    )


def plan():
    ids = [f"PMC{700000 + i * 37}" for i in range(200)]
    rng.shuffle(ids)
    used = set()
    docs = []

    # 12 licensed relevant documents with planted yields
    twin = [bb(used) for _ in range(4)]
    specs = []
    for k in range(12):
        if k < 8:
            kept = [bb(used) for _ in range(4)]
            rej = ["bg" if k % 2 else "gb"]
            if k == 0:
                rej.append("edge")
        elif k in (8, 9):
            kept, rej = list(twin), ["gb"]
        elif k == 10:
            kept, rej = [], ["bg", "gb", "gg"]
        else:
            kept, rej = [], []
        specs.append((kept, rej))

    relevant_cc0_channels = ["xml"] * 6 + ["tar"] * 2 + ["txt"] * 4
    for k, (kept, rej) in enumerate(specs):
        trip = kept + [rejected(r) for r in rej]
        title, sents = relevant_text(trip)
        ch = relevant_cc0_channels[k]
        docs.append(dict(
            role="relevant_licensed", kept=len(kept), rejected=len(rej), twin=k in (8, 9),
            title=title, sentences=sents, channel=ch,
            xml_license="CC0" if ch != "txt" else None, cache=None if ch != "txt" else "CC0",
        ))

    # 8 relevant documents whose license is not CC0
    for ch, xml_lic, cache in [
        ("xml", "CC_BY", None), ("xml", "CC_BY_NC", None), ("xml", "OTHER", None), ("xml", "CC_BY", None),
        ("txt", None, "CC_BY"), ("xml", None, "CC_BY_NC"), ("xml", None, "OTHER"), ("xml", None, "CC_BY"),
    ]:
        title, sents = relevant_text([bb(used) for _ in range(3)])
        docs.append(dict(role="relevant_unlicensed", title=title, sentences=sents, channel=ch,
                         xml_license=xml_lic, cache=cache))

    # 180 off-topic documents, 18 of them CC0
    channels = ["tar"] * 10 + ["txt"] * 33 + ["xml"] * 137
    rng.shuffle(channels)
    cc0_slots = set(rng.sample(range(180), 18))
    for j, ch in enumerate(channels):
        title, sents = off_topic_text()
        lic = "CC0" if j in cc0_slots else rng.choice(["CC_BY", "CC_BY_NC", "OTHER", None])
        if ch == "txt":
            xml_lic, cache = None, lic or "CC_BY"
        elif lic is None:
            xml_lic, cache = None, rng.choice(["CC_BY", "OTHER"])
        else:
            xml_lic, cache = lic, None
        docs.append(dict(role="off_topic", title=title, sentences=sents, channel=ch,
                         xml_license=xml_lic, cache=cache))

    for d, i in zip(docs, ids):
        d["id"] = i
        d["license"] = d["xml_license"] or d["cache"]
    return docs


# ---------------------------------------------------------------- tf-idf check

def index_tokens(text):
    return [t for t in re.split(r"[^0-9a-z]+", text.lower()) if len(t) > 1]


def doc_text(d):
    # txt documents carry no title
    body = "\n".join(d["sentences"]) if d["channel"] != "txt" else " ".join(d["sentences"])
    return body if d["channel"] == "txt" else d["title"] + "\n" + body


def tfidf_scores(docs):
    toks = {d["id"]: index_tokens(doc_text(d)) for d in docs}
    df = Counter(t for ts in toks.values() for t in set(ts))
    n = len(docs)
    idf = {t: math.log((1 + n) / (1 + c)) + 1 for t, c in df.items()}
    phrases = [p for p in (index_tokens(t) for t in TERMS) if len(p) > 1]

    def vec(ts, with_phrases):
        tf = Counter(t for t in ts if t in idf)
        if with_phrases:
            for p in phrases:
                hits = sum(1 for i in range(len(ts) - len(p) + 1) if ts[i:i + len(p)] == p)
                for t in p:
                    if hits and t in idf:
                        tf[t] += hits
        return {t: c * idf[t] for t, c in tf.items()}

    q = vec(index_tokens(" ".join(TERMS)), False)
    qn = math.sqrt(sum(v * v for v in q.values()))
    out = {}
    for d in docs:
        v = vec(toks[d["id"]], True)
        vn = math.sqrt(sum(x * x for x in v.values()))
        dot = sum(w * q.get(t, 0.0) for t, w in v.items())
        out[d["id"]] = dot / (vn * qn) if vn and qn else 0.0
    return out


# ---------------------------------------------------------------- write

def main():
    docs = plan()
    scores = tfidf_scores(docs)
    rel = [scores[d["id"]] for d in docs if d["role"] != "off_topic"]
    off = [scores[d["id"]] for d in docs if d["role"] == "off_topic"]
    assert min(rel) > MIN_SCORE * 1.2 and max(off) < MIN_SCORE / 1.2, (min(rel), max(off))

    if OUT.exists():
        shutil.rmtree(OUT)
    (OUT / "corpus" / "xml").mkdir(parents=True)
    (OUT / "corpus" / "txt").mkdir(parents=True)

    tar_members = []
    for d in docs:
        if d["channel"] == "txt":
            (OUT / "corpus" / "txt" / f'{d["id"]}.txt').write_text("\n\n".join(d["sentences"]) + "\n")
        elif d["channel"] == "xml":
            (OUT / "corpus" / "xml" / f'{d["id"]}.xml').write_text(article_xml(d))
        else:
            tar_members.append((f'batch/{d["id"]}.xml', article_xml(d).encode()))

    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz", format=tarfile.USTAR_FORMAT) as tf:
        for name, data in sorted(tar_members):
            info = tarfile.TarInfo(name)
            info.size = len(data)
            info.mtime = 1700000000
            info.mode = 0o644
            tf.addfile(info, io.BytesIO(data))
    (OUT / "corpus" / "archive.tar.gz").write_bytes(buf.getvalue())

    with open(OUT / "license_cache.jsonl", "w") as f:
        for d in sorted(docs, key=lambda d: d["id"]):
            if d["cache"]:
                f.write(json.dumps({"id": d["id"], "license": d["cache"], "fetched_at": 1700000000}) + "\n")
    (OUT / "lexicon.json").write_text(json.dumps(LEXICON, indent=1, sort_keys=True) + "\n")

    licensed = [d for d in docs if d["role"] == "relevant_licensed"]
    with_triplets = [d for d in licensed if d["kept"] + d["rejected"] > 0]
    with_kept = [d for d in licensed if d["kept"] > 0]
    extracted = sum(d["kept"] + d["rejected"] for d in licensed)
    kept = sum(d["kept"] for d in licensed)
    twin_dupes = next(d["kept"] for d in licensed if d["twin"])
    kb = kept - twin_dupes
    kb_docs = len(with_kept) - 1
    split = {"train": kb - 8, "test": 6, "validation": 2, "seed": 42}

    (OUT / "tripletforge.toml").write_text(
        "# Funnel fixture: 200 documents, 20 relevant, 30 CC0.\n\n"
        "[corpus]\nroot = \"corpus\"\n\n"
        "[relevance]\nterms = [\n" + "".join(f'  "{t}",\n' for t in TERMS) + "]\n"
        f"top_k = 50\nmin_score = {MIN_SCORE}\n\n"
        "[license]\nallowed = [\"CC0\"]\nresolver = \"cache\"\ncache = \"license_cache.jsonl\"\n\n"
        "[extraction]\nbackend = \"naive\"\nworkers = 2\n\n"
        f"[ner]\nscorer = \"lexicon\"\nlexicon = \"lexicon.json\"\nthreshold = {THRESHOLD}\n\n"
        "[split]\n" + "".join(f"{k} = {v}\n" for k, v in split.items()) + "\n"
        "[output]\ndir = \"out\"\n"
    )

    stage = lambda ai, ao, ti, to: dict(articles_in=ai, articles_out=ao, triplets_in=ti, triplets_out=to)
    truth = {
        "documents": len(docs),
        "relevant_ids": sorted(d["id"] for d in docs if d["role"] != "off_topic"),
        "cc0_ids": sorted(d["id"] for d in docs if d["license"] == "CC0"),
        "licensed_relevant_ids": sorted(d["id"] for d in licensed),
        "relevance_margin": {"min_relevant": round(min(rel), 6), "max_off_topic": round(max(off), 6)},
        "stages": {
            "ingest": stage(200, 200, 0, 0),
            "relevance": stage(200, 20, 0, 0),
            "license": stage(20, len(licensed), 0, 0),
            "extract": stage(len(licensed), len(with_triplets), 0, extracted),
            "ner-filter": stage(len(with_triplets), len(with_kept), extracted, kept),
            "dedup": stage(len(with_kept), kb_docs, kept, kb),
            "split": stage(kb_docs, kb_docs, kb, kb),
        },
    }
    assert len(truth["cc0_ids"]) == 30 and len(truth["relevant_ids"]) == 20
    (OUT / "ground_truth.json").write_text(json.dumps(truth, indent=1) + "\n")
    print(json.dumps(truth["stages"], indent=1))
    print("relevance margin", truth["relevance_margin"])


if __name__ == "__main__":
    main()
