#!/usr/bin/env python3
"""Regenerate the mock-provider fixtures (intents + canned completions).

Run after any change to the fixture corpus, chunking, embedding, prompt
template, or ontology summary: canned completions are keyed by prompt digest,
so those changes invalidate the files on purpose.

Usage: python3 scripts/regen_mock_responses.py [--config fixtures/config.json]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from indikg.config import PipelineConfig
from indikg.extraction import build_prompt, prompt_digest
from indikg.pipeline import Pipeline

# One row per fixture indicator: (system, org, indicator, range, direct, indirect)
INDICATOR_TABLE = [
    ("Endocrine", "American Thyroid Association", "Thyroid Stimulating Hormone",
     "2–10 mU/L", ["Thyroid diseases"], ["Secondary thyroid diseases"]),
    ("Endocrine", "American College of Physicians", "Testosterone",
     "Male: 300–1000 ng/L Female: 200–800 ng/L", ["Polycystic ovary syndrome"], ["Testicular dysgenesis"]),
    ("Endocrine", "Chinese Society of Endocrinology", "Growth Hormone",
     "Children: <20 µg/L Male: <2 µg/L Female: <10 µg/L", ["Gigantism", "acromegaly"], ["Pituitary dwarfism"]),
    ("Endocrine", "Chinese Society of Endocrinology", "Human chorionic gonadotropin",
     "Male or non-pregnant female: <5 IU/L Postmenopausal women: <10 IU/L",
     ["Hydatidiform mole"], ["Elevated hCG in early pregnancy"]),
    ("Endocrine", "Chinese Society of Cardiology", "Antidiuretic hormone",
     "1.4–5.6 pmol/L", ["Nephrogenic diabetes insipidus"], ["Central diabetes insipidus"]),
    ("Circulatory", "World Health Organization", "Blood pressure",
     "<120/80 mmHg", ["Hypertension", "hypotension"], ["Cardiovascular diseases"]),
    ("Circulatory", "American Heart Association", "Cholesterol",
     "<200 mg/dL", ["Atherosclerosis"], ["Metabolic syndrome"]),
    ("Circulatory", "Chinese College of Cardiovascular Physicians", "Creatine kinase",
     "Male: 50–310 U/L Female: 40–200 U/L", ["Atherosclerosis"], ["Myocarditis", "rhabdomyolysis"]),
    ("Circulatory", "European Society of Cardiology", "High-density lipoprotein",
     "Male: >40 mg/dL Female: >50 mg/dL", ["Coronary heart disease"], ["Obesity", "insulin resistance"]),
    ("Circulatory", "European Society of Cardiology", "Low-density lipoprotein",
     "<100 mg/dL", ["Coronary heart disease"], ["Diabetic vascular complications"]),
    ("Urinary", "American College of Rheumatology", "Uric acid",
     "Male: 3.0–7.0 mg/dL Female: 2.5–6.5 mg/dL", ["Gout"], ["Chronic kidney disease"]),
    ("Urinary", "American Society of Nephrology", "Urinary red blood cells",
     "<3 per HPF", ["Urolithiasis", "glomerular disease"], ["Lupus nephritis", "diabetic nephropathy"]),
    ("Urinary", "American Society of Nephrology", "Urinary white blood cells",
     "<5 per HPF", ["Urinary tract infection"], ["Chronic renal insufficiency"]),
    ("Urinary", "Kidney Disease: Improving Global Outcomes", "Urinary protein",
     "24 h: <150 mg", ["Glomerular disease"], ["Hypertensive nephropathy"]),
    ("Urinary", "Kidney Disease: Improving Global Outcomes", "Glomerular filtration rate",
     "90–120 m²/1.73", ["Renal insufficiency", "chronic kidney disease"], ["Cardiovascular diseases"]),
    ("Digestive", "World Gastroenterology Organisation", "Fecal occult blood test",
     "Negative", ["Gastrointestinal bleeding"], ["Colorectal cancer"]),
    ("Digestive", "Chinese Society of Hepatology", "Transaminase",
     "0–40 U/L", ["Hepatocellular injury"], ["Alcoholic liver disease"]),
    ("Digestive", "International Association of Pancreatology", "Lipase",
     "13–60 U/L", ["Pancreatitis"], ["Renal insufficiency"]),
    ("Digestive", "American Cancer Society", "CA19-9",
     "<37 U/mL", ["Pancreatic cancer"], ["Hepatobiliary diseases"]),
    ("Digestive", "American Cancer Society", "CEA",
     "<5 ng/mL", ["Colorectal tumor"], ["Hepatic metastasis"]),
]


def intent_for(indicator: str) -> dict:
    return {
        "query_text": f"{indicator} reference range and disease associations",
        "target_entity_types": ["ClinicalIndicator", "Disease"],
        "target_relations": ["indicates_risk_of", "indirectly_associated_with"],
        "focus_indicator": indicator,
    }


def records_for(indicator: str, range_text: str, direct: list[str], indirect: list[str], chunk_id: str) -> list[dict]:
    records = []
    for i, disease in enumerate(direct):
        rec = {
            "subject": indicator,
            "subject_type": "ClinicalIndicator",
            "relation": "indicates_risk_of",
            "object": disease,
            "object_type": "Disease",
            "attributes": [{"name": "reference_range", "value": range_text}] if i == 0 else [],
            "provenance": [chunk_id],
            "confidence": 0.95,
        }
        records.append(rec)
    for disease in indirect:
        records.append(
            {
                "subject": indicator,
                "subject_type": "ClinicalIndicator",
                "relation": "indirectly_associated_with",
                "object": disease,
                "object_type": "Disease",
                "attributes": [],
                "provenance": [chunk_id],
                "confidence": 0.9,
            }
        )
    return records


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(REPO / "fixtures" / "config.json"))
    args = parser.parse_args()

    config = PipelineConfig.from_file(args.config)
    fixtures = Path(args.config).resolve().parent

    intents = [intent_for(row[2]) for row in INDICATOR_TABLE]
    intents_path = fixtures / "intents.json"
    intents_path.write_text(json.dumps(intents, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {intents_path} ({len(intents)} intents)")

    pipeline = Pipeline(config)
    print("ingest:", pipeline.ingest())
    print("index:", pipeline.build_index())
    retriever = pipeline.retriever()
    template = pipeline.templates.latest("indicator-extraction")

    out_dir = fixtures / "mock_responses"
    out_dir.mkdir(exist_ok=True)
    for stale in out_dir.glob("*.json"):
        stale.unlink()

    for system, org, indicator, range_text, direct, indirect in INDICATOR_TABLE:
        intent = pipeline.load_intents()[[r[2] for r in INDICATOR_TABLE].index(indicator)]
        chunks = retriever.top_chunks(intent.query_text, config.retrieval_k)
        best = next((c for c in chunks if indicator.casefold() in c.text.casefold()), None)
        if best is None:
            raise SystemExit(
                f"retrieval for {indicator!r} surfaced no chunk containing it; fix the corpus or query"
            )
        if chunks[0].chunk_id != best.chunk_id:
            print(f"  note: {indicator}: best chunk ranked {chunks.index(best) + 1}, not 1")
        prompt = build_prompt(template, pipeline.schema, chunks, intent, config.prompt_budget)
        digest = prompt_digest(prompt)
        payload = records_for(indicator, range_text, direct, indirect, best.chunk_id)
        (out_dir / f"{digest}.json").write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        print(f"  {indicator}: {len(payload)} records -> {digest[:12]}…")
    print(f"wrote {len(INDICATOR_TABLE)} canned completions to {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
