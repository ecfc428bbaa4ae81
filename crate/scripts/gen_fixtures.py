#!/usr/bin/env python3
"""Regenerates the bundled test fixtures under fixtures/.

Outputs are deterministic; rerunning must leave the files unchanged.
"""
import base64
import collections
import json
import random
import re
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "fixtures"


def p(name, ty, desc, required=True, example=None):
    d = {"name": name, "type": ty, "required": required, "description": desc}
    if example is not None:
        d["example"] = example
    return d


def tool(name, desc, params):
    return {"tool_name": name, "description": desc, "params": params}


FLIGHT_SEARCH = tool(
    "flight_search",
    "Search for one-way flights between two airports. Results are sorted by price and include the carrier, departure time, arrival time and number of stops. Prices are quoted in US dollars per passenger",
    [
        p("from", "string", "Departure city or airport code. Three-letter IATA codes give the most precise matches", example="LAX"),
        p("to", "string", "Arrival city or airport code. Three-letter IATA codes give the most precise matches", example="JFK"),
        p("adult", "integer", "Number of adult passengers. Children and infants are not supported by this endpoint", example="2"),
        p("type", "string", "Cabin class such as economy or business. When omitted every cabin is searched", required=False),
    ],
)

AIRPORT_ARRIVALS = tool(
    "airport_arrivals_for_flight_fare_search",
    "Retrieves information about arriving flights. Each record lists the flight number, origin, scheduled and estimated arrival times, terminal and gate when they are known",
    [
        p("airportcode", "string", "Airport code", example="LHR"),
        p("carriercode", "string", "Airline carrier code", required=False),
        p("date", "string", "Date for checking arrivals", required=False),
    ],
)

TOOLS10 = [
    FLIGHT_SEARCH,
    AIRPORT_ARRIVALS,
    tool(
        "get_weather_forecast",
        "Returns the daily weather forecast for a location. Each day includes the minimum and maximum temperature, precipitation probability, wind speed and a short text summary. Data is refreshed every hour",
        [
            p("location", "string", "City name or latitude,longitude pair. Ambiguous city names resolve to the most populous match", example="Paris"),
            p("days", "integer", "Number of forecast days from 1 to 14. Defaults to 7 when omitted", required=False, example="3"),
            p("units", {"enum": ["metric", "imperial"]}, "Unit system for temperatures. Metric uses Celsius and kilometres per hour", required=False),
            p("include_hourly", "boolean", "Whether to add hourly detail. Hourly data makes the response considerably larger", required=False),
        ],
    ),
    tool(
        "create_calendar_event",
        "Creates an event in the user's primary calendar. Invitations are sent to every attendee by email. The event is created in the calendar owner's time zone unless the start time carries an offset",
        [
            p("title", "string", "Short title of the event. It is shown in invitations and calendar views", example="Team sync"),
            p("start", "string", "Start time in ISO 8601 format. A trailing offset such as +02:00 overrides the calendar time zone", example="2024-05-01T09:00"),
            p("duration_minutes", "integer", "Length of the event in minutes. Must be at least 5", example="30"),
            p("attendees", {"array": "string"}, "Email addresses of invited people. Invalid addresses are skipped with a warning", required=False),
            p(
                "reminder",
                {"object": [
                    p("minutes_before", "integer", "Minutes before the start to remind. Use 0 for a reminder at the start time", example="10"),
                    p("method", {"enum": ["email", "popup"]}, "How the reminder is delivered. Popup reminders need the calendar app to be open", required=False),
                ]},
                "Reminder settings. When omitted the calendar default reminder applies",
                required=False,
            ),
        ],
    ),
    tool(
        "convert_currency",
        "Converts an amount between two currencies at the latest rate. Rates come from a daily reference feed and are updated on business days only. The response includes the rate that was used and its timestamp",
        [
            p("amount", "number", "Amount of money to convert. Negative amounts are rejected", example="12.5"),
            p("from_currency", "string", "Three-letter source currency code. Codes follow ISO 4217", example="USD"),
            p("to_currency", "string", "Three-letter target currency code. Codes follow ISO 4217", example="EUR"),
        ],
    ),
    tool(
        "search_hotels",
        "Finds hotels with availability for the given dates. Results include the nightly rate, guest rating, distance from the city centre and cancellation policy. At most fifty hotels are returned",
        [
            p("city", "string", "City to search in. Neighbourhood names are not supported", example="Rome"),
            p("checkin", "string", "Check-in date. Format YYYY-MM-DD", example="2024-06-10"),
            p("checkout", "string", "Check-out date. Must be after the check-in date", example="2024-06-12"),
            p(
                "guests",
                {"object": [
                    p("adults", "integer", "Number of adults", example="2"),
                    p("children", "integer", "Number of children", required=False),
                ]},
                "Who is staying. Room allocation is chosen automatically",
            ),
            p("max_price", "number", "Highest nightly price. Expressed in the local currency of the city", required=False),
            p(
                "amenities",
                {"array": {"enum": ["wifi", "pool", "parking", "gym"]}},
                "Required amenities. Hotels missing any listed amenity are excluded",
                required=False,
            ),
        ],
    ),
    tool(
        "get_stock_quote",
        "Gets the latest trading price for a stock. Quotes are delayed by fifteen minutes and include the day range, volume and previous close",
        [
            p("symbol", "string", "Ticker symbol. Symbols are matched case-insensitively", example="AAPL"),
            p("exchange", {"enum": ["NASDAQ", "NYSE", "LSE"]}, "Exchange to quote from. When omitted the primary listing is used", required=False),
        ],
    ),
    tool("list_supported_languages", "Lists the languages the translation service supports. Each entry carries the language code and its English name", []),
    tool(
        "translate_text",
        "Translates text into another language. Formatting such as line breaks is preserved. Texts longer than five thousand characters are truncated",
        [
            p("text", "string", "Text to translate. Plain text only", example="Good morning"),
            p("target_language", "string", "Language code to translate into. Use the codes returned by the language listing", example="de"),
            p("source_language", "string", "Language code of the input. Detected automatically when omitted", required=False),
            p("formal", "boolean", "Use the formal register. Only some target languages distinguish registers", required=False),
        ],
    ),
    tool(
        "geocode_address",
        "Looks up coordinates for a street address. Matches are ranked by confidence and each carries the formatted address, latitude, longitude and match precision",
        [
            p("address", "string", "Street address to look up. Include the city and country for best results", example="10 Downing Street, London"),
            p(
                "bounds",
                {"object": [
                    p("north", "number", "Northern latitude limit"),
                    p("south", "number", "Southern latitude limit"),
                    p("east", "number", "Eastern longitude limit"),
                    p("west", "number", "Western longitude limit"),
                ]},
                "Bounding box that results must fall in. Coordinates are in decimal degrees",
                required=False,
            ),
            p("limit", "integer", "Maximum number of matches. Defaults to 5", required=False, example="5"),
        ],
    ),
]

VERBS = ["get", "search", "list", "find", "lookup", "fetch", "check", "count", "compare", "track"]
NOUNS = [
    "books", "movies", "songs", "recipes", "flights", "hotels", "players", "teams", "cities", "countries",
    "rivers", "mountains", "companies", "stocks", "authors", "awards", "languages", "planets", "elements",
    "airports", "museums", "universities", "diseases", "species", "holidays",
]
SUFFIXES = ["", "_by_name", "_pro"]


def tools234():
    rng = random.Random(234)
    names = []
    for v in VERBS:
        for n in NOUNS:
            names.append(f"{v}_{n}")
    # Prefix-nested names on purpose: `search_books` and `search_books_pro`.
    extra = [f"{v}_{n}{s}" for v in VERBS[:2] for n in NOUNS[:4] for s in SUFFIXES[1:]]
    names = sorted(set(names[: 234 - len(extra)] + extra))
    assert len(names) == 234, len(names)
    kinds = ["string", "integer", "number", "boolean"]
    out = []
    for name in names:
        params = []
        for k in range(rng.randrange(0, 4)):
            params.append(p(f"arg{k}", rng.choice(kinds), f"Argument {k}", required=rng.random() < 0.6))
        out.append(tool(name, f"Relation lookup {name.replace('_', ' ')}", params))
    return out


def toolbench_json(t):
    def schema(ty):
        if isinstance(ty, str):
            return {"type": ty}
        if "enum" in ty:
            return {"type": "string", "enum": ty["enum"]}
        if "array" in ty:
            return {"type": "array", "items": schema(ty["array"])}
        return obj(ty["object"], False)

    def obj(params, top):
        props = {}
        for q in params:
            s = schema(q["type"])
            s["description"] = q["description"]
            if "example" in q:
                s["example_value"] = q["example"]
            props[q["name"]] = s
        d = {"type": "object", "properties": props, "required": [q["name"] for q in params if q["required"]]}
        if top:
            d["optional"] = [q["name"] for q in params if not q["required"]]
        return d

    return json.dumps({"name": t["tool_name"], "description": t["description"], "parameters": obj(t["params"], True)})


def plain_text(t, i):
    lines = [f"{i}. {t['tool_name']}", "", f"   Description: {t['description']}.", "   Parameters:"]
    for q in t["params"]:
        lines.append(f"   - {q['name']}: {q['description']}.")
    return "\n".join(lines) + "\n"


def react_samples():
    return [
        'Thought: I should search flights first.\nAction: flight_search\nAction Input: {"from": "LAX", "to": "JFK", "adult": 2}\n',
        'Thought: The user wants the weather.\nAction: get_weather_forecast\nAction Input: {"location": "Paris", "days": 3}\n',
        'Thought: Convert the price.\nAction: convert_currency\nAction Input: {"amount": 12.5, "from_currency": "USD", "to_currency": "EUR"}\n',
    ]


def train_bpe(text, merges):
    chunks = collections.Counter(re.findall(rb" ?[A-Za-z]+| ?[0-9]+| ?[^\sA-Za-z0-9]+|\s+", text))
    words = {w: [bytes([b]) for b in w] for w in chunks}
    known = {bytes([b]) for b in range(256)}
    out = []
    while len(out) < merges:
        pairs = collections.Counter()
        for w, parts in words.items():
            for a, b in zip(parts, parts[1:]):
                pairs[(a, b)] += chunks[w]
        if not pairs:
            break
        (a, b), _ = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))
        merged = a + b
        for w, parts in words.items():
            i, new = 0, []
            while i < len(parts):
                if i + 1 < len(parts) and parts[i] == a and parts[i + 1] == b:
                    new.append(merged)
                    i += 2
                else:
                    new.append(parts[i])
                    i += 1
            words[w] = new
        if merged not in known:
            known.add(merged)
            out.append(merged)
    return out


def write_json(name, value, indent=2):
    (OUT / name).write_text(json.dumps(value, indent=indent, ensure_ascii=False) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    write_json("tools10.json", TOOLS10)
    write_json("tools234.json", tools234())
    write_json("flight_search.json", [FLIGHT_SEARCH])
    write_json("airport_arrivals.json", [AIRPORT_ARRIVALS])

    corpus = []
    for i, t in enumerate(TOOLS10, 1):
        corpus.append(toolbench_json(t))
        corpus.append(plain_text(t, i))
    corpus += react_samples() * 4
    merges = train_bpe("\n".join(corpus).encode(), 255)
    assert len(merges) == 255
    tokens = [bytes([b]) for b in range(256)] + merges + [b"<EOS>"]
    vocab = {
        "tokens": [base64.b64encode(t).decode() for t in tokens],
        "eos": len(tokens) - 1,
        "byte_fallback": True,
    }
    (OUT / "vocab512.json").write_text(json.dumps(vocab) + "\n")


if __name__ == "__main__":
    main()
