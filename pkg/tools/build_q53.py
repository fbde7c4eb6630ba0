"""Generate the sovereign-wealth replay fixture under src/cognigraph/fixtures/q53.

The bundle is deterministic: running this script twice writes identical files.
Page ratings are searched so that the rounded window means land on the target
profiles; every other number is a plain count over the generated data.

    python3 tools/build_q53.py [--out DIR] [--check]
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_OUT = ROOT / "src" / "cognigraph" / "fixtures" / "q53"

QUERY = "Researching how the world's wealthiest governments invest"

DEF = "definition and indicators of governmental wealth"
RANK = "country/government wealth rankings and top 10"
SRC = "data-source institutions"
CONS = "consistency across indicators"
COMP = "composite assessment methods"
OPM = "operating mechanism"
ALLOC = "asset allocation"
FISCAL = "unified fiscal-health ranking"


def cr(c, r):
    return 0.30 * c + 0.70 * r


def aap(a, b, p):
    return 0.40 * a + 0.35 * b + 0.25 * p


def fit_ratings(n: int, target: tuple[float, float], seed: int, anchor=None) -> list[list[int]]:
    """Hill-climb n Likert 5-tuples until the window means sit within 0.04 of ``target``."""
    rng = random.Random(seed)
    pages = [[rng.randint(3, 5) for _ in range(5)] for _ in range(n)]
    start = 0
    if anchor is not None:
        pages[0] = list(anchor)
        start = 1

    def err(ps):
        mc = sum(cr(p[0], p[1]) for p in ps) / len(ps)
        ma = sum(aap(p[2], p[3], p[4]) for p in ps) / len(ps)
        return abs(mc - target[0]) + abs(ma - target[1]), mc, ma

    best, mc, ma = err(pages)
    for _ in range(2000):
        if abs(mc - target[0]) < 0.04 and abs(ma - target[1]) < 0.04 and (round(mc, 1), round(ma, 1)) == target:
            return pages
        # steepest single-step descent, with a random kick when stuck
        move, move_err = None, best
        for i in range(start, n):
            for d in range(5):
                for step in (-1, 1):
                    if not 1 <= pages[i][d] + step <= 5:
                        continue
                    pages[i][d] += step
                    e = err(pages)[0]
                    pages[i][d] -= step
                    if e < move_err - 1e-12:
                        move, move_err = (i, d, step), e
        if move is None:
            # local minimum: restart from a fresh random draw
            for i in range(start, n):
                pages[i] = [rng.randint(2, 5) for _ in range(5)]
        else:
            i, d, step = move
            pages[i][d] += step
        best, mc, ma = err(pages)
    raise RuntimeError(f"could not fit ratings to {target}")


def rating_dicts(pages, barrier_tail: int = 0) -> list[dict]:
    out = [{"c": p[0], "r": p[1], "alpha": p[2], "beta": p[3], "rho": p[4], "barrier": None} for p in pages]
    for _ in range(barrier_tail):
        out.append({"c": 3, "r": 2, "alpha": 3, "beta": 3, "rho": 3, "barrier": "requires_download"})
    return out


def quote_for(answer: str, source: str, url: str) -> str:
    body = (
        f"{source} states the following in its published material: {answer}. "
        f"The figure is given together with the reporting date and the basis of measurement, "
        f"and the document notes that the numbers are reviewed annually before release (see {url})."
    )
    return body[:480]


class Counter:
    def __init__(self):
        self.n = 0

    def url(self, host: str) -> str:
        self.n += 1
        return f"https://{host}/doc/{self.n:03d}"


URLS = Counter()


def finding(criterion, answer, source, host, *, item=None, attribute=None, category="organization", partial=False, ranking=None):
    url = URLS.url(host)
    f = {
        "criterion": criterion,
        "answer": answer,
        "evidence_quote": quote_for(answer, source, url),
        "source_url": url,
    }
    if item:
        f["attributed_item"] = item
        f["item_category"] = category
    if attribute:
        f["attribute"] = attribute
    if partial:
        f["partial"] = True
    if ranking:
        f["ranking"] = ranking
    return f


def observation(task_id, target, edge, findings, pages, *, psi="none", strength="strong", unexpected=(), notes=(), queries=(), synthesis=""):
    return {
        "task_id": task_id,
        "target_node": target,
        "edge_id": edge,
        "findings": findings,
        "page_scores": pages,
        "accessibility_notes": [list(n) for n in notes],
        "unexpected_insights": [list(u) for u in unexpected],
        "search_experience": [],
        "psi": psi,
        "finding_strength": strength,
        "temporal_context": ["figures as of 2023-2024"],
        "synthesis": synthesis,
        "queries": list(queries),
        "search_calls": len(queries),
    }


def local_synthesis(findings) -> str:
    return " ".join(f"{f['answer']} [[{i}]]." for i, f in enumerate(findings, 1))


# ---------------------------------------------------------------------------
# graph, planner, realization
# ---------------------------------------------------------------------------


def initial_graph() -> dict:
    return {
        "query": QUERY,
        "structure_type": "convergence",
        "nodes": [
            {"id": "e1", "name": "User question", "node_type": "start"},
            {"id": "e2", "name": "Wealthiest governments list", "node_type": "placeholder", "user_named": True},
            {"id": "e3", "name": "Operating mechanism", "core_criteria": [OPM]},
            {"id": "e4", "name": "Asset allocation", "core_criteria": [ALLOC]},
        ],
        "edges": [
            {"id": "r1", "source": "e1", "target": "e2", "relation": "identifies", "inquiry_goal": "which governments are wealthiest"},
            {"id": "r2", "source": "e2", "target": "e3", "relation": "operating_mechanism", "inquiry_goal": "how they operate their wealth", "core_criteria": [OPM]},
            {"id": "r3", "source": "e2", "target": "e4", "relation": "asset_allocation", "inquiry_goal": "how they allocate assets", "core_criteria": [ALLOC]},
        ],
    }


ENTITIES = [
    ("e_dyn_1", "Norway NBIM ($2.1T)"),
    ("e_dyn_2", "China SWF system (PBoC/SAFE/CIC, $7.2T)"),
    ("e_dyn_3", "Japan GPIF ($1.9T)"),
    ("e_dyn_4", "US Federal investment system"),
]


def realization() -> dict:
    edits = []
    for nid, name in ENTITIES:
        edits.append({
            "op": "add_node",
            "node": {"id": nid, "name": name, "node_type": "discovered", "core_criteria": [OPM, ALLOC]},
        })
    for k, (nid, _) in enumerate(ENTITIES, 1):
        edits.append({
            "op": "add_edge",
            "edge": {"id": f"r_dyn_{k}", "source": "e2", "target": nid, "relation": "invests_through", "core_criteria": [OPM, ALLOC]},
        })
    edits += [{"op": "remove_node", "id": "e3"}, {"op": "remove_node", "id": "e4"}]
    return {"turn-3": {"edits": edits}}


def add_task(task_id, edge, target, core, supp=(), *, task_type="open", source=None, strategy=None, content=""):
    a = {
        "type": "add_task",
        "task_id": task_id,
        "cognitive_edge_id": edge,
        "cognitive_target_id": target,
        "task_type": task_type,
        "core_criteria": list(core),
        "supplementary_criteria": list(supp),
        "node_content": content,
    }
    if source:
        a["specified_source"] = source
    if strategy:
        a["strategy"] = strategy
    return a


PROFILE = {
    "e_dyn_1": ("task_nbim_investment_profile", "r_dyn_1", ["fund size and AUM trajectory", "operating mechanism (mandate, governance)", "asset allocation by class and geography"]),
    "e_dyn_2": ("task_china_swf_investment_profile", "r_dyn_2", ["PBoC/SAFE/CIC division of labour", "operating mechanism per entity", "asset allocation per entity"]),
    "e_dyn_3": ("task_gpif_investment_profile", "r_dyn_3", ["fund size and AUM trajectory", "operating mechanism (board, mandate)", "policy portfolio weights"]),
    "e_dyn_4": ("task_us_federal_investment_profile", "r_dyn_4", ["federal investment vehicles", "operating mechanism per vehicle", "asset allocation per vehicle"]),
}

FOLLOW = {
    "e_dyn_1": ("task_nbim_esg_thresholds", "r_dyn_1", ["ESG exclusion quantitative thresholds"], ["review process and decision mechanism"], "NBIM official exclusion guidelines"),
    "e_dyn_2": ("task_china_swf_disclosure_channels", "r_dyn_2", ["reporting channel to international bodies"], ["disclosure frequency"], "SAFE annual report"),
    "e_dyn_3": ("task_gpif_voting_policy", "r_dyn_3", ["voting-against trigger"], ["stewardship reporting"], "GPIF stewardship report"),
}


def planner() -> dict:
    t1 = add_task(
        "task_wealthiest_governments_definition_ranking", "r1", "e2",
        [DEF, RANK], [SRC, CONS, COMP],
        content="Explore how government wealth is defined and which governments rank highest; prefer 2023-2024 data from international organisations and finance media.",
    )
    reflect = (
        "Review of e2: thirteen findings cover two different subject classes, the largest economies by GDP and the "
        "largest state investors. Pages describe operating model and allocation together, per investor, so the two "
        "dimension nodes would each need the same per-investor sources. Concretising e2 into investor nodes that "
        "carry both criteria covers the axis change as well; one operator is enough."
    )
    conc = {
        "type": "propose_restructure",
        "op_type": "conc",
        "focus": "e2",
        "rationale": (
            "Evidence groups by investing subject: Norway NBIM, the Chinese SWF system, Japan GPIF and the US federal "
            "vehicles. Operating mechanism and allocation co-occur per subject, so e2 is concretised into four subject "
            "nodes carrying both criteria and the two dimension placeholders are folded in."
        ),
        "realization": "turn-3",
    }
    profiles = [add_task(t, e, nid, core, [], content=f"Profile {name}: size, governance and allocation.") for (nid, name), (t, e, core) in ((x, PROFILE[x[0]]) for x in ENTITIES)]
    follows = {nid: add_task(t, e, nid, core, supp, task_type="specified", source=src, strategy="exploit") for nid, (t, e, core, supp, src) in FOLLOW.items()}
    pivot = add_task(
        "task_gov_fiscal_health_ranking", "r1", "e2", [FISCAL], ["balance-sheet coverage"],
        strategy="pivot", content="Rank governments by fiscal health (net worth, balance sheets) instead of GDP.",
    )
    closing = (
        "No node is unknown. Remaining gaps: no body publishes a unified fiscal-health ranking; NBIM states exclusion "
        "criteria qualitatively; the SAFE reporting channel is not public; GPIF voting detail sits in documents past "
        "the page limit. These are disclosure and access limits that more searching will not close."
    )
    turns = [
        {"actions": [t1]},
        {"actions": [], "note": reflect},
        {"actions": [conc]},
        {"actions": profiles},
        {"actions": [follows["e_dyn_1"], follows["e_dyn_2"]]},
        {"actions": [follows["e_dyn_3"]]},
        {"actions": [pivot]},
        {"actions": [], "note": closing},
        {"actions": [{"type": "finish"}]},
    ]
    return {"turns": turns}


# ---------------------------------------------------------------------------
# observations
# ---------------------------------------------------------------------------


def round1() -> dict:
    fs = [
        finding(DEF, "Government wealth is measured either by GDP or by public-sector net worth", "IMF Fiscal Monitor", "imf.org"),
        finding(SRC, "IMF, World Bank and SWF Institute are the primary data sources", "SWF Institute", "swfinstitute.org"),
        finding(RANK, "United States leads nominal GDP at $27T", "World Bank", "worldbank.org", item="United States", attribute="GDP", category="country", partial=True),
        finding(RANK, "China ranks second in nominal GDP at $17.8T", "World Bank", "worldbank.org", item="China", attribute="GDP", category="country", partial=True),
        finding(RANK, "Germany ranks third in nominal GDP", "IMF WEO", "imf.org", item="Germany", attribute="GDP", category="country", partial=True),
        finding(RANK, "Japan ranks fourth in nominal GDP", "IMF WEO", "imf.org", item="Japan", attribute="GDP", category="country", partial=True),
        finding(RANK, "India ranks fifth in nominal GDP", "IMF WEO", "imf.org", item="India", attribute="GDP", category="country", partial=True),
        finding(RANK, "PBoC manages about $3.7T of reserve assets", "SWF Institute", "swfinstitute.org", item="PBoC", attribute="assets under management", partial=True),
        finding(RANK, "NBIM manages about $2.1T", "NBIM", "nbim.no", item="NBIM", attribute="assets under management", partial=True),
        finding(RANK, "SAFE manages about $1.95T", "SWF Institute", "swfinstitute.org", item="SAFE", attribute="assets under management", partial=True),
        finding(RANK, "GPIF manages about $1.88T", "GPIF", "gpif.go.jp", item="GPIF", attribute="assets under management", partial=True),
        finding(CONS, "GDP and government-asset rankings disagree on the top 10", "OECD", "oecd.org", attribute="definitional split"),
        finding(COMP, "The three largest SWFs control more than half of tracked SWF assets", "Global SWF", "globalswf.com", attribute="top-3 concentration"),
    ]
    pages = rating_dicts(fit_ratings(14, (3.6, 3.7), seed=11))
    return observation(
        "task_wealthiest_governments_definition_ranking", "e2", "r1", fs, pages,
        psi="moderate", strength="strong",
        unexpected=[
            ("state pensions", "state pensions may exceed nat'l SWFs", "pension fund reports"),
            ("GDP distortion", "shell companies distort GDP figures", "IMF working paper"),
        ],
        queries=["wealthiest governments ranking 2024", "largest sovereign wealth funds 2024", "government net worth ranking"],
        synthesis=local_synthesis(fs),
    )


def profile_findings(nid: str) -> list[dict]:
    if nid == "e_dyn_1":
        c = PROFILE[nid][2]
        return [
            finding(c[0], "GPFG market value reached NOK 15.8 trillion in 2023", "NBIM annual report", "nbim.no"),
            finding(c[0], "Fund value grew roughly tenfold since 2008", "NBIM", "nbim.no", attribute="AUM growth"),
            finding(c[1], "Ministry of Finance sets the mandate; Norges Bank manages the fund", "Norwegian Ministry of Finance", "regjeringen.no"),
            finding(c[1], "Parliament approves changes to the fund's strategy", "Norwegian Ministry of Finance", "regjeringen.no", attribute="parliamentary oversight"),
            finding(OPM, "Operational management is delegated to NBIM under Norges Bank", "Norges Bank", "norges-bank.no"),
            finding(c[1], "Product-based exclusion covers thermal-coal mining above a revenue share", "NBIM exclusion guidelines", "nbim.no", attribute="coal criterion"),
            finding(ALLOC, "Equities make up about 70 percent of the fund", "NBIM", "nbim.no"),
            finding(c[1], "Exclusion decisions are taken by the Norges Bank executive board", "Norges Bank", "norges-bank.no", attribute="exclusion decisions"),
            finding(c[2], "Equity share 70.9%, fixed income 27.1%, unlisted real estate 1.9%", "NBIM annual report", "nbim.no", partial=True),
            finding(c[2], "About half of equities are held in North America", "NBIM", "nbim.no", attribute="regional split", partial=True),
            finding(c[1], "The Council on Ethics recommends exclusions to Norges Bank", "Council on Ethics", "etikkradet.no", attribute="ethics council"),
            finding(c[0], "The fund holds about 1.5 percent of listed equities worldwide", "NBIM", "nbim.no", attribute="global ownership share"),
            finding(c[1], "The fiscal rule caps spending at the expected 3 percent real return", "Norwegian Ministry of Finance", "regjeringen.no", attribute="fiscal rule"),
            finding(c[1], "Conduct-based exclusion applies to serious environmental damage", "Council on Ethics", "etikkradet.no", attribute="conduct criterion"),
        ]
    if nid == "e_dyn_2":
        c = PROFILE[nid][2]
        return [
            finding(c[0], "PBoC holds reserves, SAFE manages them, CIC invests a carved-out portion", "SAFE", "safe.gov.cn"),
            finding(c[0], "CIC was capitalised with $200B of special bonds in 2007", "CIC", "china-inv.cn", attribute="CIC origin"),
            finding(c[1], "SAFE reports to the PBoC and runs reserve management", "SAFE", "safe.gov.cn"),
            finding(c[1], "CIC reports to the State Council", "CIC annual report", "china-inv.cn", attribute="CIC governance"),
            finding(c[1], "Central Huijin holds state stakes in domestic banks", "CIC annual report", "china-inv.cn", attribute="Huijin role"),
            finding(OPM, "Reserve management follows safety, liquidity and value preservation", "SAFE", "safe.gov.cn"),
            finding(ALLOC, "CIC overseas portfolio is split across public equity, fixed income and alternatives", "CIC annual report", "china-inv.cn"),
            finding(c[2], "CIC holds about 40 percent in alternative assets", "CIC annual report", "china-inv.cn", partial=True),
            finding(c[2], "SAFE does not publish its currency composition", "SAFE", "safe.gov.cn", attribute="SAFE composition", partial=True),
            finding(c[0], "SAFE Investment Company operates from Hong Kong", "Global SWF", "globalswf.com", attribute="SAFE subsidiaries"),
            finding(c[1], "CIC's board includes ministry representatives", "CIC", "china-inv.cn", attribute="CIC board"),
            finding(c[2], "CIC reports a 10-year annualised return of about 6 percent", "CIC annual report", "china-inv.cn", attribute="CIC returns", partial=True),
            finding(c[0], "Combined assets of PBoC, SAFE and CIC exceed $7T", "SWF Institute", "swfinstitute.org", attribute="combined size"),
            finding(c[1], "National Council for Social Security Fund runs pension reserves separately", "NSSF", "ssf.gov.cn", attribute="NSSF role"),
            finding(c[2], "Foreign reserves are mostly in fixed income", "SAFE", "safe.gov.cn", attribute="reserve allocation", partial=True),
        ]
    if nid == "e_dyn_3":
        c = PROFILE[nid][2]
        return [
            finding(c[0], "GPIF assets reached about JPY 246 trillion in 2024", "GPIF annual report", "gpif.go.jp"),
            finding(c[0], "GPIF is the largest pension fund in the world", "Thinking Ahead Institute", "thinkingaheadinstitute.org", attribute="global rank"),
            finding(c[1], "A board of governors oversees GPIF since 2017", "GPIF", "gpif.go.jp"),
            finding(c[1], "The Ministry of Health, Labour and Welfare sets the medium-term objectives", "MHLW", "mhlw.go.jp", attribute="ministry role"),
            finding(OPM, "GPIF invests through external asset managers", "GPIF", "gpif.go.jp"),
            finding(ALLOC, "GPIF holds four asset classes in equal target weights", "GPIF", "gpif.go.jp"),
            finding(c[2], "Policy portfolio is 25% each in domestic and foreign bonds and equities", "GPIF", "gpif.go.jp", partial=True),
            finding(c[2], "Deviation bands around each target weight are published", "GPIF", "gpif.go.jp", attribute="deviation bands", partial=True),
            finding(c[1], "GPIF selects ESG indices for passive equity", "GPIF ESG report", "gpif.go.jp", attribute="ESG indices"),
            finding(c[0], "Cumulative return since 2001 is about JPY 150 trillion", "GPIF annual report", "gpif.go.jp", attribute="cumulative return"),
            finding(c[1], "Stewardship activities are delegated to asset managers", "GPIF stewardship report", "gpif.go.jp", attribute="stewardship"),
            finding(c[2], "Alternative assets are capped at 5 percent", "GPIF", "gpif.go.jp", attribute="alternatives cap", partial=True),
        ]
    c = PROFILE[nid][2]
    return [
        finding(c[0], "The US has no national sovereign wealth fund", "US Treasury", "treasury.gov"),
        finding(c[0], "The Federal Retirement Thrift Investment Board runs the TSP", "FRTIB", "frtib.gov", attribute="TSP"),
        finding(c[0], "The Exchange Stabilization Fund holds foreign currency assets", "US Treasury", "treasury.gov", attribute="ESF"),
        finding(c[1], "TSP funds track indices chosen by the board", "FRTIB", "frtib.gov"),
        finding(c[1], "The Social Security trust funds hold special-issue Treasuries only", "Social Security Administration", "ssa.gov", attribute="trust funds"),
        finding(OPM, "Federal vehicles are governed by statute rather than an investment mandate", "CRS", "crsreports.congress.gov"),
        finding(ALLOC, "Most federal holdings are Treasury securities", "CRS", "crsreports.congress.gov"),
        finding(c[2], "TSP G Fund invests in non-marketable Treasuries", "FRTIB", "frtib.gov"),
        finding(c[2], "Alaska Permanent Fund and Texas PSF are state-level, not federal", "NASRA", "nasra.org", attribute="state funds"),
        finding(c[0], "TSP assets exceed $800B", "FRTIB", "frtib.gov", attribute="TSP size"),
    ]


PROFILE_TARGETS = {
    "e_dyn_1": ((3.9, 4.4), 13, (4, 4, 5, 4, 3)),
    "e_dyn_2": ((3.7, 3.8), 15, None),
    "e_dyn_3": ((3.8, 4.1), 12, None),
    "e_dyn_4": ((3.6, 3.9), 10, None),
}


def profile_observation(nid: str, seed: int) -> dict:
    task_id, edge, core = PROFILE[nid]
    target, n, anchor = PROFILE_TARGETS[nid]
    fs = profile_findings(nid)
    pages = rating_dicts(fit_ratings(n, target, seed=seed, anchor=anchor))
    return observation(
        task_id, nid, edge, fs, pages, strength="strong",
        queries=[f"{dict(ENTITIES)[nid]} governance", f"{dict(ENTITIES)[nid]} asset allocation"],
        synthesis=local_synthesis(fs),
    )


def followups() -> list[dict]:
    out = []
    t, e, core, supp, _ = FOLLOW["e_dyn_1"]
    fs = [
        finding(core[0], "Coal criterion applies above 30% of revenue from thermal coal", "NBIM exclusion guidelines", "nbim.no", partial=True),
        finding(core[0], "Thermal-coal power producers fall under the same revenue test", "Norwegian Ministry of Finance", "regjeringen.no", attribute="power generation", partial=True),
        finding(supp[0], "Norges Bank may choose observation instead of exclusion", "Council on Ethics", "etikkradet.no"),
        finding(supp[0], "Exclusion decisions are published with a rationale", "NBIM", "nbim.no", attribute="publication"),
    ]
    out.append(observation(t, "e_dyn_1", e, fs, rating_dicts(fit_ratings(4, (4.0, 4.5), seed=31)), queries=['"NBIM official exclusion guidelines" coal threshold'], synthesis=local_synthesis(fs)))
    t, e, core, supp, _ = FOLLOW["e_dyn_2"]
    fs = [
        finding(core[0], "SAFE reports reserve data to the IMF under SDDS", "IMF", "imf.org", partial=True),
        finding(core[0], "CIC publishes an annual report but no holdings list", "CIC", "china-inv.cn", attribute="CIC disclosure", partial=True),
        finding(supp[0], "SAFE publishes reserve totals monthly", "SAFE", "safe.gov.cn"),
        finding(supp[0], "CIC reports annually", "CIC", "china-inv.cn", attribute="CIC frequency"),
    ]
    out.append(observation(t, "e_dyn_2", e, fs, rating_dicts(fit_ratings(4, (3.6, 3.7), seed=37)), queries=['"SAFE annual report" IMF reporting'], synthesis=local_synthesis(fs)))
    t, e, core, supp, _ = FOLLOW["e_dyn_3"]
    fs = [
        finding(core[0], "Voting is exercised by external managers under GPIF principles", "GPIF stewardship report", "gpif.go.jp", partial=True),
        finding(supp[0], "GPIF publishes a stewardship report each year", "GPIF", "gpif.go.jp"),
        finding(supp[0], "GPIF evaluates managers on stewardship in meetings", "GPIF", "gpif.go.jp", attribute="manager evaluation"),
    ]
    out.append(observation(
        t, "e_dyn_3", e, fs, rating_dicts(fit_ratings(3, (3.8, 4.2), seed=41), barrier_tail=1),
        notes=[("voting-against trigger", "requires_download", "detailed voting records sit deep in a long PDF")],
        queries=['"GPIF stewardship report" voting'], synthesis=local_synthesis(fs),
    ))
    fs = [
        finding(FISCAL, "IMF Public Sector Balance Sheet data cover about 40 countries", "IMF", "imf.org", partial=True),
        finding(FISCAL, "Norway and Hong Kong show the highest public net worth relative to GDP", "IMF Fiscal Monitor", "imf.org", attribute="net worth leaders", partial=True),
        finding("balance-sheet coverage", "World Bank debt statistics cover liabilities only", "World Bank", "worldbank.org"),
    ]
    out.append(observation(
        "task_gov_fiscal_health_ranking", "e2", "r1", fs, rating_dicts(fit_ratings(4, (3.5, 3.9), seed=43)),
        psi="weak", strength="moderate", queries=["government net worth ranking IMF"], synthesis=local_synthesis(fs),
    ))
    return out


def all_observations() -> list[dict]:
    obs = [round1()]
    for k, (nid, _) in enumerate(ENTITIES):
        obs.append(profile_observation(nid, seed=21 + k))
    obs += followups()
    return obs


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------


def evidence_ranges(obs: list[dict]) -> dict[str, list[int]]:
    """Global ids per task, in dispatch order (every finding has a distinct URL)."""
    out, m = {}, 0
    for o in obs:
        ids = list(range(m + 1, m + 1 + len(o["findings"])))
        out[o["task_id"]] = ids
        m += len(o["findings"])
    return out


SECTIONS = [
    (1, "What counts as government wealth", "Definitions, indicators and rankings", ["e2"], 7),
    (2, "Norway: the Government Pension Fund Global", "How NBIM is governed and invests", ["e_dyn_1"], 7),
    (3, "China's sovereign wealth system", "Division of labour between PBoC, SAFE and CIC", ["e_dyn_2"], 7),
    (4, "Japan: GPIF", "Pension reserve governance and policy portfolio", ["e_dyn_3"], 6),
    (5, "United States: federal investment vehicles", "Why the US has no national SWF", ["e_dyn_4"], 6),
    (6, "Comparing allocation across investors", "Asset mix side by side", ["e_dyn_1", "e_dyn_2", "e_dyn_3", "e_dyn_4"], 7),
    (7, "Governance evolution and ethical screening", "How oversight and exclusion practice developed", ["e_dyn_1", "e_dyn_3", "e2"], 6),
    (8, "Data gaps and measurement limits", "What the public record cannot yet answer", ["e2", "e_dyn_2", "e_dyn_4"], 6),
]

NODE_TASKS = {
    "e2": ["task_wealthiest_governments_definition_ranking", "task_gov_fiscal_health_ranking"],
    "e_dyn_1": ["task_nbim_investment_profile", "task_nbim_esg_thresholds"],
    "e_dyn_2": ["task_china_swf_investment_profile", "task_china_swf_disclosure_channels"],
    "e_dyn_3": ["task_gpif_investment_profile", "task_gpif_voting_policy"],
    "e_dyn_4": ["task_us_federal_investment_profile"],
}

INVALID_REF = 64
INVALID_SECTION = 7


def writing(obs: list[dict]) -> dict:
    ranges = evidence_ranges(obs)
    by_id = {}
    for o in obs:
        for m, f in zip(ranges[o["task_id"]], o["findings"]):
            by_id[m] = f["answer"]
    outline, plans, prose = [], {}, {}
    for sid, title, desc, nodes, n_ins in SECTIONS:
        outline.append({"section_id": sid, "title": title, "description": desc, "answers_aspect": desc, "relevant_node_ids": nodes})
        pool = sorted({m for nid in nodes for t in NODE_TASKS[nid] for m in ranges[t]})
        if sid == 2:
            # the opening insight of the NBIM section binds the exclusion records
            anchors = [[19, 21, 27]]
        else:
            anchors = []
        insights = []
        for i in range(n_ins):
            if i < len(anchors):
                ids = anchors[i]
            else:
                start = (i * 3) % max(1, len(pool) - 2)
                ids = pool[start:start + 2 + (i % 2)]
            claim = f"{title}: " + "; ".join(by_id[m] for m in ids)
            entry = {"claim": claim, "evidence_ids": list(ids), "hint": ["narrative", "comparison", "list", "table"][i % 4]}
            if sid == INVALID_SECTION and i == 1:
                entry["evidence_ids"] = list(ids) + [INVALID_REF]
            insights.append(entry)
        plans[str(sid)] = insights
        sentences = [f"{by_id[ins['evidence_ids'][0]]} " + "".join(f"[[{m}]]" for m in ins["evidence_ids"] if m != INVALID_REF or sid != INVALID_SECTION) + "." for ins in insights]
        prose[str(sid)] = " ".join(sentences)
    return {"outline": outline, "plans": plans, "prose": prose}


def manifest(obs: list[dict], wr: dict, turns: list[dict]) -> dict:
    ranges = evidence_ranges(obs)
    return {
        "planner_iterations": len(turns),
        "search_turns": sum(any(a["type"] == "add_task" for a in t["actions"]) for t in turns),
        "restructure": {"op_type": "conc", "added": 4, "removed": 2, "violations": 0},
        "final_nodes": 6,
        "evidence_records": sum(len(v) for v in ranges.values()),
        "sections": len(wr["outline"]),
        "insights": sum(len(v) for v in wr["plans"].values()),
        "invalid_ref": {"section": INVALID_SECTION, "ref": INVALID_REF},
        "task_ranges": {t: [v[0], v[-1]] for t, v in ranges.items()},
    }


def build(out: Path) -> dict[str, str]:
    global URLS
    URLS = Counter()
    obs = all_observations()
    wr = writing(obs)
    files = {
        "query.json": {"query": QUERY, "graph": initial_graph()},
        "planner.json": planner(),
        "realizations.json": realization(),
        "writing.json": wr,
        "manifest.json": manifest(obs, wr, planner()["turns"]),
    }
    rendered = {name: json.dumps(data, ensure_ascii=False, indent=1, sort_keys=True) + "\n" for name, data in files.items()}
    for o in obs:
        rendered[f"observations/{o['task_id']}.json"] = json.dumps(o, ensure_ascii=False, indent=1, sort_keys=True) + "\n"
    return rendered


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--check", action="store_true", help="fail if files on disk differ from a fresh build")
    args = ap.parse_args(argv)
    rendered = build(args.out)
    stale = []
    for name, text in rendered.items():
        path = args.out / name
        if args.check:
            if not path.exists() or path.read_text(encoding="utf-8") != text:
                stale.append(name)
            continue
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    if stale:
        print("stale fixture files: " + ", ".join(stale), file=sys.stderr)
        return 1
    print(f"{len(rendered)} files {'checked' if args.check else 'written'} under {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
