#!/usr/bin/env python3
"""Regenerates the shipped dataset bundles and task files under fixtures/.

The bundles are synthetic reconstructions shaped like small tabular
classification datasets (see README); every value is drawn from a seeded
generator, so reruns are reproducible. Each bundle ships with a mock script
whose canned answers are plausible per-column values, letting the LLM
imputation path run fully offline.
"""

import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"

N_ROWS = 250


def fmt(v, nd=1):
    out = round(v, nd)
    if out == int(out):
        return str(int(out))
    return str(out)


def write_bundle(name, description, domain, target, columns, rows, mock_hints):
    d = FIX / "bundles" / name
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "description": description,
        "target": target,
        "domain": domain,
        "columns": columns,
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    header = ",".join(c["name"] for c in columns)
    lines = [header]
    for row in rows:
        lines.append(",".join(row))
    (d / "data.csv").write_text("\n".join(lines) + "\n")

    entries = [
        {
            "match": "Here is the description of the dataset",
            "response": mock_hints.pop("__epi__"),
        }
    ]
    for col, answer in mock_hints.items():
        entries.append(
            {
                "match": "The %s is <missing>." % col,
                "response": json.dumps({"output": answer}),
            }
        )
    (d / "mock.json").write_text(
        json.dumps({"entries": entries, "fallback": json.dumps({"output": 0})}, indent=2)
        + "\n"
    )


def gen_credit(rng):
    columns = [
        {"name": "Age", "kind": "continuous", "units": "years"},
        {"name": "Income", "kind": "continuous", "units": "kEUR"},
        {"name": "LoanAmount", "kind": "continuous", "units": "kEUR"},
        {"name": "DurationMonths", "kind": "continuous", "units": "months"},
        {"name": "Purpose", "kind": "categorical",
         "categories": ["car", "furniture", "education", "business"]},
        {"name": "Housing", "kind": "categorical", "categories": ["own", "rent", "free"]},
        {"name": "Savings", "kind": "continuous", "units": "kEUR"},
        {"name": "Risk", "kind": "categorical", "categories": ["good", "bad"]},
    ]
    rows, means = [], {"Age": [], "Income": [], "LoanAmount": [], "DurationMonths": [],
                       "Savings": []}
    for _ in range(N_ROWS):
        age = max(19, min(75, rng.gauss(38, 11)))
        income = max(8, rng.gauss(34, 12))
        loan = max(0.5, rng.gauss(9, 5))
        duration = max(6, min(72, rng.gauss(24, 12)))
        purpose = rng.choice(columns[4]["categories"])
        housing = rng.choices(columns[5]["categories"], weights=[5, 4, 1])[0]
        savings = max(0, rng.gauss(6, 5))
        score = (income - 30) / 12 + (savings - 5) / 5 - (loan - 9) / 5 - (duration - 24) / 24
        risk = "good" if score + rng.gauss(0, 0.8) > 0 else "bad"
        rows.append([fmt(age), fmt(income), fmt(loan), fmt(duration), purpose, housing,
                     fmt(savings), risk])
        for key, v in zip(means, (age, income, loan, duration, savings)):
            means[key].append(v)
    hints = {
        "__epi__": "You are a senior retail credit officer who has approved loans "
                   "across two economic cycles and knows typical applicant profiles "
                   "by heart.",
        "Age": fmt(sum(means["Age"]) / N_ROWS),
        "Income": fmt(sum(means["Income"]) / N_ROWS),
        "LoanAmount": fmt(sum(means["LoanAmount"]) / N_ROWS),
        "DurationMonths": fmt(sum(means["DurationMonths"]) / N_ROWS),
        "Savings": fmt(sum(means["Savings"]) / N_ROWS),
        "Purpose": "car",
        "Housing": "own",
    }
    write_bundle(
        "credit",
        "Consumer credit applications from a European retail bank, with applicant "
        "demographics, loan terms and a good/bad risk label assigned by the credit "
        "committee.",
        "economics", "Risk", columns, rows, hints)


def gen_heart(rng):
    columns = [
        {"name": "Age", "kind": "continuous", "units": "years"},
        {"name": "RestingBP", "kind": "continuous", "units": "mmHg"},
        {"name": "Cholesterol", "kind": "continuous", "units": "mg/dL"},
        {"name": "MaxHeartRate", "kind": "continuous", "units": "bpm"},
        {"name": "ChestPain", "kind": "categorical",
         "categories": ["typical", "atypical", "non-anginal", "asymptomatic"]},
        {"name": "Sex", "kind": "categorical", "categories": ["M", "F"]},
        {"name": "Disease", "kind": "categorical", "categories": ["absent", "present"]},
    ]
    rows = []
    for _ in range(N_ROWS):
        age = max(29, min(80, rng.gauss(54, 9)))
        bp = max(94, rng.gauss(131, 17))
        chol = max(120, rng.gauss(246, 50))
        hr = max(70, min(205, rng.gauss(150, 22) - (age - 54) * 0.8))
        pain = rng.choices(columns[4]["categories"], weights=[2, 2, 3, 3])[0]
        sex = rng.choice(["M", "F"])
        risk = (age - 54) / 9 + (bp - 131) / 17 + (chol - 246) / 50 - (hr - 150) / 22
        disease = "present" if risk + rng.gauss(0, 1.2) > 0 else "absent"
        rows.append([fmt(age), fmt(bp), fmt(chol), fmt(hr), pain, sex, disease])
    hints = {
        "__epi__": "You are a consultant cardiologist who reads stress-test charts "
                   "daily and has an intuitive grasp of typical vitals for patients "
                   "in every decade of life.",
        "Age": "54", "RestingBP": "130", "Cholesterol": "245", "MaxHeartRate": "150",
        "ChestPain": "non-anginal", "Sex": "M",
    }
    write_bundle(
        "heart",
        "Cardiology clinic records combining resting measurements, exercise test "
        "results and demographics, labeled with the presence or absence of coronary "
        "artery disease.",
        "medicine", "Disease", columns, rows, hints)


def gen_wine(rng):
    columns = [
        {"name": "Alcohol", "kind": "continuous", "units": "% vol"},
        {"name": "VolatileAcidity", "kind": "continuous", "units": "g/L"},
        {"name": "ResidualSugar", "kind": "continuous", "units": "g/L"},
        {"name": "Sulphates", "kind": "continuous", "units": "g/L"},
        {"name": "pH", "kind": "continuous"},
        {"name": "Color", "kind": "categorical", "categories": ["red", "white"]},
        {"name": "Quality", "kind": "categorical", "categories": ["low", "high"]},
    ]
    rows = []
    for _ in range(N_ROWS):
        color = rng.choice(["red", "white"])
        alcohol = max(8.4, min(14.9, rng.gauss(10.5, 1.1)))
        va = max(0.1, rng.gauss(0.53 if color == "red" else 0.28, 0.12))
        sugar = max(0.9, rng.gauss(2.5 if color == "red" else 6.4, 2.0))
        sulph = max(0.3, rng.gauss(0.66, 0.15))
        ph = max(2.8, min(3.9, rng.gauss(3.31, 0.15)))
        score = (alcohol - 10.5) / 1.1 - (va - 0.4) / 0.12 * 0.6
        quality = "high" if score + rng.gauss(0, 1.0) > 0 else "low"
        rows.append([fmt(alcohol, 2), fmt(va, 2), fmt(sugar, 2), fmt(sulph, 2), fmt(ph, 2),
                     color, quality])
    hints = {
        "__epi__": "You are a veteran enologist who has run a wine laboratory for "
                   "twenty years and can recite typical assay values for any style "
                   "of table wine.",
        "Alcohol": "10.5", "VolatileAcidity": "0.4", "ResidualSugar": "4",
        "Sulphates": "0.66", "pH": "3.31", "Color": "white",
    }
    write_bundle(
        "wine",
        "Laboratory assay measurements of commercial table wines together with the "
        "wine color and a sensory-panel quality grade.",
        "physics and chemistry", "Quality", columns, rows, hints)


def gen_housing(rng):
    columns = [
        {"name": "Rooms", "kind": "continuous"},
        {"name": "AreaSqm", "kind": "continuous", "units": "m^2"},
        {"name": "YearBuilt", "kind": "continuous"},
        {"name": "DistanceCenterKm", "kind": "continuous", "units": "km"},
        {"name": "Garden", "kind": "categorical", "categories": ["yes", "no"]},
        {"name": "District", "kind": "categorical",
         "categories": ["north", "south", "east", "west", "center"]},
        {"name": "PriceBand", "kind": "categorical", "categories": ["low", "mid", "high"]},
    ]
    rows = []
    for _ in range(N_ROWS):
        rooms = max(1, min(8, round(rng.gauss(3.4, 1.2))))
        area = max(22, rng.gauss(30 * rooms, 18))
        year = max(1890, min(2023, round(rng.gauss(1978, 28))))
        dist = max(0.3, rng.gauss(6.5, 3.5))
        garden = rng.choices(["yes", "no"], weights=[2, 3])[0]
        district = rng.choice(columns[5]["categories"])
        score = area / 40 - dist / 5 + (1 if garden == "yes" else 0) + (year - 1978) / 50
        noisy = score + rng.gauss(0, 0.7)
        band = "low" if noisy < 1.4 else ("mid" if noisy < 2.6 else "high")
        rows.append([fmt(rooms), fmt(area), fmt(year), fmt(dist), garden, district, band])
    hints = {
        "__epi__": "You are a long-serving municipal property appraiser who valuates "
                   "apartments and houses and knows how size, age and location drive "
                   "prices.",
        "Rooms": "3", "AreaSqm": "100", "YearBuilt": "1978", "DistanceCenterKm": "6",
        "Garden": "no", "District": "center",
    }
    write_bundle(
        "housing",
        "Municipal property assessment records with dwelling size, age, location "
        "attributes and the assessed market price band.",
        "business", "PriceBand", columns, rows, hints)


def gen_synth20(rng):
    columns = []
    for i in range(17):
        columns.append({"name": "Sensor%02d" % i, "kind": "continuous"})
    columns.append({"name": "Line", "kind": "categorical", "categories": ["A", "B", "C"]})
    columns.append({"name": "Shift", "kind": "categorical", "categories": ["day", "night"]})
    columns.append({"name": "Fault", "kind": "categorical", "categories": ["ok", "fault"]})
    rows = []
    for _ in range(N_ROWS):
        base = rng.gauss(0, 1)
        sensors = [base * (0.3 + 0.05 * i) + rng.gauss(10 + i, 2) for i in range(17)]
        line = rng.choice(["A", "B", "C"])
        shift = rng.choice(["day", "night"])
        fault = "fault" if base + rng.gauss(0, 0.8) > 0.8 else "ok"
        rows.append([fmt(s, 2) for s in sensors] + [line, shift, fault])
    hints = {"__epi__": "You are a plant process engineer who monitors sensor arrays "
                        "on production lines and recognizes normal operating ranges "
                        "instantly."}
    for i in range(17):
        hints["Sensor%02d" % i] = fmt(10 + i)
    hints["Line"] = "A"
    hints["Shift"] = "day"
    write_bundle(
        "synth20",
        "Process-monitoring snapshots from a production plant: seventeen correlated "
        "sensor channels, the production line and shift, and a fault indicator from "
        "the quality gate.",
        "engineering", "Fault", columns, rows, hints)


def gen_pulse2(rng):
    columns = [
        {"name": "RestingPulse", "kind": "continuous", "units": "bpm"},
        {"name": "FitnessLevel", "kind": "categorical",
         "categories": ["low", "medium", "high"]},
    ]
    rows = []
    for _ in range(N_ROWS):
        level = rng.choices(["low", "medium", "high"], weights=[1, 2, 1])[0]
        base = {"low": 82, "medium": 70, "high": 58}[level]
        pulse = max(40, rng.gauss(base, 6))
        rows.append([fmt(pulse), level])
    hints = {
        "__epi__": "You are a sports physician who screens amateur athletes and "
                   "knows resting heart rates for every fitness level.",
        "RestingPulse": "70",
    }
    write_bundle(
        "pulse2",
        "Resting pulse screenings from a sports-medicine practice, labeled with the "
        "athlete's assessed fitness level.",
        "medicine", "FitnessLevel", columns, rows, hints)


CITIES = [
    ("Tokyo", "Japan", 35.6895, 139.6917, "large"),
    ("Delhi", "India", 28.6139, 77.209, "large"),
    ("Shanghai", "China", 31.2304, 121.4737, "large"),
    ("Sao Paulo", "Brazil", -23.5505, -46.6333, "large"),
    ("Cairo", "Egypt", 30.0444, 31.2357, "large"),
    ("Mexico City", "Mexico", 19.4326, -99.1332, "large"),
    ("New York", "United States", 40.7128, -74.006, "large"),
    ("Lagos", "Nigeria", 6.5244, 3.3792, "large"),
    ("Istanbul", "Turkey", 41.0082, 28.9784, "large"),
    ("London", "United Kingdom", 51.5074, -0.1278, "large"),
    ("Paris", "France", 48.8566, 2.3522, "large"),
    ("Moscow", "Russia", 55.7558, 37.6173, "large"),
    ("Sydney", "Australia", -33.8688, 151.2093, "large"),
    ("Reykjavik", "Iceland", 64.1466, -21.9426, "small"),
    ("Ushuaia", "Argentina", -54.8019, -68.303, "small"),
    ("Kaiserslautern", "Germany", 49.4447, 7.769, "small"),
    ("Tromso", "Norway", 69.6492, 18.9553, "small"),
    ("Queenstown", "New Zealand", -45.0312, 168.6626, "small"),
    ("Banff", "Canada", 51.1784, -115.5708, "small"),
    ("Luang Prabang", "Laos", 19.8867, 102.1353, "small"),
    ("Alice Springs", "Australia", -23.698, 133.8807, "small"),
    ("Nuuk", "Greenland", 64.1835, -51.7216, "small"),
    ("Zermatt", "Switzerland", 46.0207, 7.7491, "small"),
    ("Taos", "United States", 36.4072, -105.5731, "small"),
    ("Hallstatt", "Austria", 47.5622, 13.6493, "small"),
]


def gen_cities():
    doc = {
        "note": "Reconstructed city list: 25 settlements across continents and "
                "population classes. Coordinates are approximate city centers.",
        "cities": [
            {"name": n, "country": c, "latitude": lat, "longitude": lon,
             "population_class": pc}
            for (n, c, lat, lon, pc) in CITIES
        ],
    }
    (FIX / "cities.json").write_text(json.dumps(doc, indent=2) + "\n")


def gen_weather_tasks():
    tasks = []
    for (name, country, _lat, _lon, _pc) in CITIES:
        slug = name.lower().replace(" ", "_")
        tasks.append({
            "id": "weather_temp_%s" % slug,
            "domain": "meteorology",
            "question": "the typical daily mean temperature in %s, %s during the "
                        "month of December, in degrees Celsius" % (name, country),
            "family": "normal",
            "data": {"source": "weather_temperature", "city": name},
        })
        tasks.append({
            "id": "weather_precip_%s" % slug,
            "domain": "meteorology",
            "question": "the typical daily precipitation sum in %s, %s during the "
                        "month of December, in millimetres" % (name, country),
            "family": "gamma",
            "data": {"source": "weather_precipitation", "city": name},
        })
    doc = {"note": "Weather elicitation tasks paired with archive-backed ground "
                   "truth; one temperature and one precipitation task per city.",
           "tasks": tasks}
    (FIX / "tasks" / "weather_tasks.json").write_text(json.dumps(doc, indent=2) + "\n")


BETA_TASKS = [
    ("healthcare", "the proportion of adults who adhere to a prescribed daily "
                   "medication regimen for a chronic condition"),
    ("healthcare", "the probability that a routine screening appointment is kept "
                   "rather than missed"),
    ("healthcare", "the proportion of seasonal influenza vaccinations that prevent "
                   "symptomatic infection in a given season"),
    ("healthcare", "the share of hospital patients who report satisfaction with "
                   "their discharge instructions"),
    ("healthcare", "the probability that an adult in a high-income country has "
                   "visited a dentist within the last year"),
    ("economics", "the share of households that keep a written monthly budget"),
    ("economics", "the probability that a small business survives its first five "
                  "years"),
    ("economics", "the proportion of consumers who compare at least two offers "
                  "before a major purchase"),
    ("economics", "the share of retail payments made in cash in a European city"),
    ("technology", "the proportion of smartphone users who install an operating "
                   "system update within one month of release"),
    ("technology", "the probability that a support ticket is resolved on first "
                   "contact at a mature software firm"),
    ("technology", "the share of e-commerce shopping carts that are abandoned "
                   "before checkout"),
    ("technology", "the proportion of two-factor authentication prompts that are "
                   "approved within one minute"),
    ("environmental science", "the share of municipal solid waste that is recycled "
                              "in a mid-sized European city"),
    ("environmental science", "the probability that a random December day in "
                              "central Europe has measurable precipitation"),
    ("environmental science", "the proportion of commuters who use public "
                              "transport in a large metropolitan area"),
    ("environmental science", "the share of residential electricity that comes "
                              "from renewable sources in a Nordic country"),
    ("marketing", "the click-through rate of a well-targeted display advertising "
                  "campaign"),
    ("marketing", "the probability that a newsletter subscriber opens a given "
                  "weekly issue"),
    ("marketing", "the proportion of loyalty-program members who redeem at least "
                  "one reward per year"),
    ("marketing", "the conversion rate of visitors on a product landing page"),
    ("education", "the proportion of first-year university students who complete "
                  "their degree within six years"),
    ("education", "the probability that an assigned weekly reading is completed "
                  "before the seminar"),
    ("education", "the share of pupils who report enjoying mathematics at age 15"),
    ("education", "the proportion of adults who participated in any formal "
                  "training during the last twelve months"),
]


def gen_beta_tasks():
    tasks = []
    for i, (domain, question) in enumerate(BETA_TASKS, start=1):
        tasks.append({
            "id": "beta_%02d" % i,
            "domain": domain,
            "question": question,
            "family": "beta",
            "support": [0, 1],
        })
    doc = {"note": "Reconstructed confidence-elicitation tasks (proportions and "
                   "probabilities following a beta distribution); not the original "
                   "task texts.",
           "tasks": tasks}
    (FIX / "tasks" / "beta_tasks.json").write_text(json.dumps(doc, indent=2) + "\n")


def gen_psych_tasks():
    fields = [
        ("social", "social psychology"),
        ("developmental", "developmental psychology"),
        ("cognitive_neuro", "cognitive neuroscience"),
    ]
    tasks = []
    for slug, field in fields:
        tasks.append({
            "id": "psych_delta_%s" % slug,
            "domain": "psychology",
            "question": "the typical small-to-medium standardized effect size "
                        "(Cohen's delta) observed in published %s studies" % field,
            "family": "student_t",
        })
        tasks.append({
            "id": "psych_rho_%s" % slug,
            "domain": "psychology",
            "question": "the typical absolute Pearson correlation observed in "
                        "published %s studies" % field,
            "family": "beta",
            "support": [0, 1],
        })
    doc = {"note": "Effect-size elicitation tasks modeled on published expert "
                   "interviews; question wording is a reconstruction.",
           "tasks": tasks}
    (FIX / "tasks" / "psych_tasks.json").write_text(json.dumps(doc, indent=2) + "\n")


def main():
    rng = random.Random(20240501)
    (FIX / "bundles").mkdir(parents=True, exist_ok=True)
    (FIX / "tasks").mkdir(parents=True, exist_ok=True)
    gen_credit(rng)
    gen_heart(rng)
    gen_wine(rng)
    gen_housing(rng)
    gen_synth20(rng)
    gen_pulse2(rng)
    gen_cities()
    gen_weather_tasks()
    gen_beta_tasks()
    gen_psych_tasks()
    print("fixtures written under", FIX)


if __name__ == "__main__":
    main()
