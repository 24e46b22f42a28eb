#!/usr/bin/env python3
"""Regenerates fixtures/bundle: a small corpus, a canned-completion replay
store, and the metrics the pipeline must reproduce from them.

Everything here is computed independently of the C++ tree: the punctuation
perturbation and request digests are re-derived from first principles (same
published splitmix64/FNV-1a constants), and the expected metrics come from
exact Fraction arithmetic. If the pipeline and this script disagree, one of
them is wrong — that is the point.

Run from the repository root:  python3 scripts/gen_bundle.py
"""

import json
import math
import os
import random
from fractions import Fraction

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUT = os.path.join(ROOT, "fixtures", "bundle")

MODEL = "bundle-model"
TEMPERATURE = 0.7
TOP_P = 0.95
MAX_TOKENS = 2048
SEED_BASE = 1000
N_AGENTS = 25
N_LIST = [1, 2, 5, 10, 15, 20, 25]
PUNCT_SEED = 7          # perturb --seed 7; question i uses 7 + i
PUNCT_INTENSITY = 0.3

MASK = (1 << 64) - 1

# ---------------------------------------------------------------------------
# splitmix64 + bounded draw, mirroring the published reference algorithms
# ---------------------------------------------------------------------------

class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def bounded(self, bound):
        x = self.next()
        m = x * bound
        low = m & MASK
        if low < bound:
            threshold = (1 << 64) % bound
            while low < threshold:
                x = self.next()
                m = x * bound
                low = m & MASK
        return m >> 64


def draw_without_replacement(pool, k, rng):
    idx = list(range(pool))
    k = min(k, pool)
    for i in range(k):
        j = i + rng.bounded(pool - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]


# ---------------------------------------------------------------------------
# punctuation perturbation (for single-space ASCII text)
# ---------------------------------------------------------------------------

PUNCT_SYMBOLS = [".", ",", "!", "?", ";", ":"]


def split_words(text):
    spans, i, n = [], 0, len(text)
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        begin = i
        while i < n and not text[i].isspace():
            i += 1
        spans.append((begin, i))
    return spans


def lround(x):
    """C lround for non-negative x: round half away from zero."""
    f = math.floor(x)
    frac = x - f
    if frac > 0.5:
        return f + 1
    if frac < 0.5:
        return f
    return f + 1


def perturb_punct(text, intensity, seed):
    words = split_words(text)
    assert words, "cannot perturb empty text"
    if len(words) == 1:
        sites = [words[0][1]]
    else:
        sites = [end for (_, end) in words[:-1]]
    k = lround(intensity * len(words))
    rng = SplitMix64(seed)
    chosen = draw_without_replacement(len(sites), k, rng)
    while len(chosen) < k:
        chosen.append(rng.bounded(len(sites)))
    edits = []
    for site in chosen:
        symbol = PUNCT_SYMBOLS[rng.bounded(len(PUNCT_SYMBOLS))]
        edits.append((sites[site], " " + symbol))
    edits.sort(key=lambda e: e[0])  # stable, like the consumer expects
    out, cursor = [], 0
    for pos, repl in edits:
        out.append(text[cursor:pos])
        out.append(repl)
        cursor = pos
    out.append(text[cursor:])
    return "".join(out)


# ---------------------------------------------------------------------------
# request digests (FNV-1a 64 over the canonical JSON request body)
# ---------------------------------------------------------------------------

def fnv1a64(data):
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return format(h, "016x")


def request_digest(model, prompt, temperature, top_p, max_tokens, seed):
    body = {
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
        "top_p": top_p,
        "max_tokens": max_tokens,
        "seed": seed,
    }
    return fnv1a64(json.dumps(body, sort_keys=True, separators=(",", ":")).encode())


assert request_digest("toy-model", "What is 2+2?", 0.7, 0.95, 2048, 7) == "e583fcb77d0b98b0"

PROMPT_TEMPLATE = (
    "Can you solve the following math problem? {question} Explain your "
    "reasoning. Your final answer should be a single numerical number, in "
    "the form \\boxed{answer}, at the end of your response."
)


def build_prompt(question_text):
    return PROMPT_TEMPLATE.replace("{question}", question_text, 1)


# ---------------------------------------------------------------------------
# the corpus: 20 short arithmetic questions, plain single-space ASCII
# ---------------------------------------------------------------------------

QUESTIONS = [
    ("b00", "Mia reads 12 pages every day for 6 days. How many pages does she read in total?", Fraction(72)),
    ("b01", "A baker sells 45 rolls in the morning and 38 in the afternoon. How many rolls were sold that day?", Fraction(83)),
    ("b02", "Sam had 90 marbles and gave 27 to his sister. How many marbles does Sam keep?", Fraction(63)),
    ("b03", "Each crate holds 16 bottles. How many bottles fit in 7 crates?", Fraction(112)),
    ("b04", "A rope of 84 meters is cut into 4 equal pieces. How long is each piece in meters?", Fraction(21)),
    ("b05", "Nina saves 15 dollars a week. After 9 weeks she spends 40 dollars. How many dollars remain?", Fraction(95)),
    ("b06", "A class of 28 students splits into teams of 4. How many teams are formed?", Fraction(7)),
    ("b07", "A recipe needs 9 cups of flour for 4 batches. How many cups go into one batch?", Fraction(9, 4)),
    ("b08", "Tickets cost 8 dollars each and a group buys 13 tickets. What is the total cost in dollars?", Fraction(104)),
    ("b09", "A car drives 54 miles per hour for 3 hours. How far does it travel in miles?", Fraction(162)),
    ("b10", "Leo picks 36 apples and packs them into bags of 6. How many bags does he fill?", Fraction(6)),
    ("b11", "A tank holds 120 liters and is drained at 8 liters per minute. How many minutes until it is empty?", Fraction(15)),
    ("b12", "Ana scores 11, 14, and 17 points in three games. What is her total score?", Fraction(42)),
    ("b13", "Two runners share one medal budget equally. What fraction of the budget does each runner get?", Fraction(1, 2)),
    ("b14", "A shelf has 5 rows with 19 books in each row. How many books are on the shelf?", Fraction(95)),
    ("b15", "Tom walks 260 meters to school and the same distance back. How many meters does he walk in total?", Fraction(520)),
    ("b16", "The temperature drops from 4 degrees to -3 degrees overnight. What is the final temperature in degrees?", Fraction(-3)),
    ("b17", "A worker earns 19 dollars per hour and works 6 hours. How much is earned in dollars?", Fraction(114)),
    ("b18", "A warehouse stores 1234 boxes across all floors. How many boxes are stored in total?", Fraction(1234)),
    ("b19", "A garden has 48 tulips and one quarter of them are red. How many tulips are red?", Fraction(12)),
]

GOLD_TEXT = {
    "b07": "9/4",
    "b13": "0.5",
    "b16": "-3",
}

# Per-question chance that one agent answers correctly, per condition. The
# r2ata texts are written below; their profile is the harshest.
P_CORRECT = {
    #        clean punct30 r2ata
    "b00": (0.95, 0.80, 0.55),
    "b01": (0.90, 0.75, 0.50),
    "b02": (0.85, 0.85, 0.60),
    "b03": (0.90, 0.60, 0.35),
    "b04": (0.80, 0.70, 0.45),
    "b05": (0.20, 0.10, 0.05),
    "b06": (1.00, 0.95, 0.80),
    "b07": (0.75, 0.55, 0.30),
    "b08": (0.95, 0.90, 0.70),
    "b09": (0.85, 0.65, 0.40),
    "b10": (0.90, 0.80, 0.65),
    "b11": (0.70, 0.50, 0.25),
    "b12": (0.95, 0.85, 0.60),
    "b13": (0.65, 0.45, 0.30),
    "b14": (0.85, 0.75, 0.55),
    "b15": (0.80, 0.90, 0.50),   # noise helps here: literal vs restricted differ
    "b16": (0.70, 0.40, 0.20),
    "b17": (0.90, 0.70, 0.45),
    "b18": (0.85, 0.60, 0.40),
    "b19": (0.00, 0.00, 0.10),   # never right when clean
}
CONDITIONS = ["clean", "punct30", "r2ata"]

# Hand-mangled texts for the preloaded condition: character swaps and joined
# words, digits untouched.
R2ATA_TEXTS = {
    "b00": "Mia raeds 12 pages every dya for 6 days. How many pages does she read in total?",
    "b01": "A bkaer sells 45 rolls in the mroning and 38 in the afternoon. How many rolls were sold that day?",
    "b02": "Sam had 90 marbles adn gave 27 to his sitser. How many marbles does Sam keep?",
    "b03": "Each ctare holds 16 bottles. How many bottles fit in 7 crates?",
    "b04": "A rpoe of 84 meters is cut into 4 eqaul pieces. How long is each piece in meters?",
    "b05": "Nina svaes 15 dollars a week. After 9 weeks she spends 40 dollars. How many dollarsremain?",
    "b06": "A calss of 28 students splits into temas of 4. How many teams are formed?",
    "b07": "A rceipe needs 9 cups of fluor for 4 batches. How many cups go into one batch?",
    "b08": "Tcikets cost 8 dollars each and a gruop buys 13 tickets. What is the total cost in dollars?",
    "b09": "A car dirves 54 miles per huor for 3 hours. How far does it travel in miles?",
    "b10": "Leo pciks 36 apples and packs them into bgas of 6. How many bags does he fill?",
    "b11": "A tnak holds 120 liters and is dranied at 8 liters per minute. How many minutes until it is empty?",
    "b12": "Ana socres 11, 14, and 17 points in trhee games. What is her total score?",
    "b13": "Two rnuners share one medal bugdet equally. What fraction of the budget does each runner get?",
    "b14": "A slehf has 5 rows with 19 books in ecah row. How many books are on the shelf?",
    "b15": "Tom wlaks 260 meters to school and the smae distance back. How many meters does he walk in total?",
    "b16": "The temperatrue drops from 4 degrees to -3 degrees overnight. What is the fnial temperature in degrees?",
    "b17": "A wroker earns 19 dollars per hour and wokrs 6 hours. How much is earnedin dollars?",
    "b18": "A warehuose stores 1234 boxes acrossall floors. How many boxes are stored in total?",
    "b19": "A gadren has 48 tulips and one qaurter of them are red. How many tulips are red?",
}

PREFIXES = [
    "Let us work through this step by step.",
    "First set up the quantities, then combine them.",
    "We translate the story into arithmetic.",
    "Carefully tracking each amount:",
    "Breaking the problem into small steps:",
]

FILLERS = [
    "I am not sure how to set this up, sorry.",
    "This problem seems ambiguous to me and I will stop here.",
    "Hmm, I lost track of the quantities halfway through.",
    "Unable to decide between the readings of this problem.",
]


def render_value(value, rng):
    """A decimal or fraction string for an exact rational."""
    if value.denominator == 1:
        return str(value.numerator)
    scaled = value * 1000
    if scaled.denominator == 1 and rng.random() < 0.5:
        return f"{float(value):g}"
    return f"{value.numerator}/{value.denominator}"


def correct_text(qid, gold, rng):
    style = rng.randrange(3)
    prefix = rng.choice(PREFIXES)
    if style == 0:
        shown = GOLD_TEXT.get(qid, str(gold.numerator) if gold.denominator == 1 else None)
        if shown is None:
            shown = render_value(gold, rng)
        return f"{prefix} The final answer is \\boxed{{{shown}}}."
    if style == 1:
        # an equivalent spelling: unreduced fraction or decimal
        if gold.denominator == 1:
            if qid == "b18" and rng.random() < 0.5:
                shown = f"{gold.numerator:,}"
            else:
                shown = f"{gold.numerator * 2}/2"
        else:
            shown = f"{float(gold):g}" if (gold * 100).denominator == 1 else render_value(gold, rng)
        return f"{prefix} The final answer is \\boxed{{{shown}}}."
    shown = GOLD_TEXT.get(qid, render_value(gold, rng))
    return f"{prefix}\nAnswer: {shown}"


def wrong_text(gold, rng):
    if rng.random() < 0.10:
        return rng.choice(FILLERS)
    delta = rng.choice([Fraction(1), Fraction(-2), Fraction(3), Fraction(1, 2)])
    value = gold + delta
    prefix = rng.choice(PREFIXES)
    if rng.random() < 0.5:
        return f"{prefix} The final answer is \\boxed{{{render_value(value, rng)}}}."
    return f"{prefix}\nAnswer: {render_value(value, rng)}"


def completion_for(qid, cond, agent, gold, p):
    rng = random.Random(f"{qid}:{cond}:{agent}")
    if rng.random() < p:
        return correct_text(qid, gold, rng), gold
    text = wrong_text(gold, rng)
    if text in FILLERS:
        return text, None
    return text, _planted_value(text, gold)


def _planted_value(text, gold):
    # parse back the value we just rendered (the render grammar is tiny)
    token = None
    if "\\boxed{" in text:
        token = text.split("\\boxed{", 1)[1].split("}", 1)[0]
    elif "Answer: " in text:
        token = text.split("Answer: ", 1)[1].splitlines()[0]
    assert token is not None, text
    token = token.replace(",", "")
    if "/" in token:
        num, den = token.split("/")
        return Fraction(int(num), int(den))
    return Fraction(token)


# ---------------------------------------------------------------------------
# majority vote + metrics, in exact arithmetic
# ---------------------------------------------------------------------------

def majority(ballots):
    """Earliest-max majority over Fraction-or-None ballots."""
    counts = {}
    order = []
    for b in ballots:
        if b is None:
            continue
        if b not in counts:
            counts[b] = 0
            order.append(b)
        counts[b] += 1
    if not counts:
        return None
    best = max(counts.values())
    for b in order:
        if counts[b] == best:
            return b
    raise AssertionError


def population_std(values):
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(float(var))


def main():
    os.makedirs(os.path.join(OUT, "store"), exist_ok=True)

    with open(os.path.join(OUT, "corpus.jsonl"), "w") as f:
        for qid, text, gold in QUESTIONS:
            gold_text = GOLD_TEXT.get(qid, str(gold))
            f.write(json.dumps({"id": qid, "text": text, "gold": gold_text}) + "\n")

    with open(os.path.join(OUT, "preloaded_r2ata.jsonl"), "w") as f:
        for qid, _, _ in QUESTIONS:
            f.write(json.dumps({"id": qid, "text": R2ATA_TEXTS[qid]}) + "\n")

    # texts per condition
    cond_text = {}
    for i, (qid, text, _) in enumerate(QUESTIONS):
        cond_text[(qid, "clean")] = text
        cond_text[(qid, "punct30")] = perturb_punct(text, PUNCT_INTENSITY, PUNCT_SEED + i)
        cond_text[(qid, "r2ata")] = R2ATA_TEXTS[qid]

    # canned completions + the planted canonical values
    planted = {}  # (qid, cond, agent) -> Fraction | None
    digests = {}
    store_files = {cond: open(os.path.join(OUT, "store", f"{cond}.jsonl"), "w")
                   for cond in CONDITIONS}
    for ci, cond in enumerate(CONDITIONS):
        for qi, (qid, _, gold) in enumerate(QUESTIONS):
            prompt = build_prompt(cond_text[(qid, cond)])
            p = P_CORRECT[qid][ci]
            for agent in range(N_AGENTS):
                text, value = completion_for(qid, cond, agent, gold, p)
                planted[(qid, cond, agent)] = value
                d = request_digest(MODEL, prompt, TEMPERATURE, TOP_P, MAX_TOKENS,
                                   SEED_BASE + agent)
                assert d not in digests, f"digest collision: {digests[d]} vs {(qid, cond)}"
                digests[d] = (qid, cond, agent)
                store_files[cond].write(json.dumps({"digest": d, "response": text}) + "\n")
    for f in store_files.values():
        f.close()

    # group-level correctness per (cond, n): correct[g] = set of right qids
    gold_of = {qid: gold for qid, _, gold in QUESTIONS}
    correct = {}
    for cond in CONDITIONS:
        for n in N_LIST:
            groups = N_AGENTS // n
            for g in range(groups):
                winners = {}
                for qid, _, _ in QUESTIONS:
                    ballots = [planted[(qid, cond, a)] for a in range(g * n, (g + 1) * n)]
                    winners[qid] = majority(ballots)
                correct[(cond, n, g)] = {qid for qid, w in winners.items()
                                         if w is not None and w == gold_of[qid]}

    # metric rows
    rows = []
    for cond in ["clean"] + sorted(c for c in CONDITIONS if c != "clean"):
        for n in N_LIST:
            groups = N_AGENTS // n
            accs = [Fraction(len(correct[(cond, n, g)]), len(QUESTIONS))
                    for g in range(groups)]
            acc_mean, acc_std = population_std(accs)
            asr_mean = asr_std = ""
            if cond != "clean":
                ratios = []
                for g in range(groups):
                    base = correct[("clean", n, g)]
                    if not base:
                        continue
                    flips = sum(1 for qid in base if qid not in correct[(cond, n, g)])
                    ratios.append(Fraction(flips, len(base)))
                if ratios:
                    m, s = population_std(ratios)
                    asr_mean, asr_std = repr(float(m)), repr(s)
            rows.append((MODEL, "all", cond, n, repr(float(acc_mean)), repr(acc_std),
                         asr_mean, asr_std, groups))

    with open(os.path.join(OUT, "expected_metrics.csv"), "w") as f:
        f.write("model,dataset,condition,n,acc_mean,acc_std,asr_mean,asr_std,group_count\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")

    n_samples = len(QUESTIONS) * len(CONDITIONS) * N_AGENTS
    print(f"wrote {len(QUESTIONS)} questions, {n_samples} canned completions, "
          f"{len(rows)} expected metric rows under {OUT}")


if __name__ == "__main__":
    main()
