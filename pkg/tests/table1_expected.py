"""Frozen ground truth for the 20 fixture indicators.

Hand-transcribed from the fixture indicator table; kept independent of the
corpus files and the mock-response generator so tests have their own oracle.
Disease names are casefolded for comparison (entity identity folds case).
"""

from __future__ import annotations

# indicator -> (system, issuing org, range text, direct diseases, indirect diseases)
EXPECTED = {
    "Thyroid Stimulating Hormone": (
        "Endocrine", "American Thyroid Association", "2–10 mU/L",
        {"thyroid diseases"}, {"secondary thyroid diseases"},
    ),
    "Testosterone": (
        "Endocrine", "American College of Physicians", "Male: 300–1000 ng/L Female: 200–800 ng/L",
        {"polycystic ovary syndrome"}, {"testicular dysgenesis"},
    ),
    "Growth Hormone": (
        "Endocrine", "Chinese Society of Endocrinology", "Children: <20 µg/L Male: <2 µg/L Female: <10 µg/L",
        {"gigantism", "acromegaly"}, {"pituitary dwarfism"},
    ),
    "Human chorionic gonadotropin": (
        "Endocrine", "Chinese Society of Endocrinology",
        "Male or non-pregnant female: <5 IU/L Postmenopausal women: <10 IU/L",
        {"hydatidiform mole"}, {"elevated hcg in early pregnancy"},
    ),
    "Antidiuretic hormone": (
        "Endocrine", "Chinese Society of Cardiology", "1.4–5.6 pmol/L",
        {"nephrogenic diabetes insipidus"}, {"central diabetes insipidus"},
    ),
    "Blood pressure": (
        "Circulatory", "World Health Organization", "<120/80 mmHg",
        {"hypertension", "hypotension"}, {"cardiovascular diseases"},
    ),
    "Cholesterol": (
        "Circulatory", "American Heart Association", "<200 mg/dL",
        {"atherosclerosis"}, {"metabolic syndrome"},
    ),
    "Creatine kinase": (
        "Circulatory", "Chinese College of Cardiovascular Physicians", "Male: 50–310 U/L Female: 40–200 U/L",
        {"atherosclerosis"}, {"myocarditis", "rhabdomyolysis"},
    ),
    "High-density lipoprotein": (
        "Circulatory", "European Society of Cardiology", "Male: >40 mg/dL Female: >50 mg/dL",
        {"coronary heart disease"}, {"obesity", "insulin resistance"},
    ),
    "Low-density lipoprotein": (
        "Circulatory", "European Society of Cardiology", "<100 mg/dL",
        {"coronary heart disease"}, {"diabetic vascular complications"},
    ),
    "Uric acid": (
        "Urinary", "American College of Rheumatology", "Male: 3.0–7.0 mg/dL Female: 2.5–6.5 mg/dL",
        {"gout"}, {"chronic kidney disease"},
    ),
    "Urinary red blood cells": (
        "Urinary", "American Society of Nephrology", "<3 per HPF",
        {"urolithiasis", "glomerular disease"}, {"lupus nephritis", "diabetic nephropathy"},
    ),
    "Urinary white blood cells": (
        "Urinary", "American Society of Nephrology", "<5 per HPF",
        {"urinary tract infection"}, {"chronic renal insufficiency"},
    ),
    "Urinary protein": (
        "Urinary", "Kidney Disease: Improving Global Outcomes", "24 h: <150 mg",
        {"glomerular disease"}, {"hypertensive nephropathy"},
    ),
    "Glomerular filtration rate": (
        "Urinary", "Kidney Disease: Improving Global Outcomes", "90–120 m²/1.73",
        {"renal insufficiency", "chronic kidney disease"}, {"cardiovascular diseases"},
    ),
    "Fecal occult blood test": (
        "Digestive", "World Gastroenterology Organisation", "Negative",
        {"gastrointestinal bleeding"}, {"colorectal cancer"},
    ),
    "Transaminase": (
        "Digestive", "Chinese Society of Hepatology", "0–40 U/L",
        {"hepatocellular injury"}, {"alcoholic liver disease"},
    ),
    "Lipase": (
        "Digestive", "International Association of Pancreatology", "13–60 U/L",
        {"pancreatitis"}, {"renal insufficiency"},
    ),
    "CA19-9": (
        "Digestive", "American Cancer Society", "<37 U/mL",
        {"pancreatic cancer"}, {"hepatobiliary diseases"},
    ),
    "CEA": (
        "Digestive", "American Cancer Society", "<5 ng/mL",
        {"colorectal tumor"}, {"hepatic metastasis"},
    ),
}

SYSTEMS = {"Endocrine", "Circulatory", "Urinary", "Digestive"}
DISTINCT_GUIDELINES = {row[1] for row in EXPECTED.values()}  # 15 issuing orgs

RANGE_STRINGS = [row[2] for row in EXPECTED.values()]


def two_hop_join_oracle(seed: str) -> set[str]:
    """Indicators sharing at least one disease (direct or indirect) with seed."""
    _, _, _, d, i = EXPECTED[seed]
    seed_diseases = d | i
    out = set()
    for other, (_, _, _, od, oi) in EXPECTED.items():
        if other == seed:
            continue
        if seed_diseases & (od | oi):
            out.add(other)
    return out
