"""Regenerates the fixture images, manifest, benchmark queries and scripts.

Run from any directory: python3 fixtures/generate.py
Output is deterministic; rerunning rewrites identical files.
"""

import json
from pathlib import Path

from PIL import Image, ImageDraw

HERE = Path(__file__).resolve().parent
SIZE = 100

PALETTE = [
    (0, "background", [0, 0, 0]),
    (1, "building", [220, 20, 60]),
    (2, "road", [128, 128, 128]),
    (3, "water", [30, 144, 255]),
    (4, "barren", [210, 180, 140]),
    (5, "forest", [34, 139, 34]),
    (6, "agriculture", [255, 215, 0]),
]
CLASS = {name: cid for cid, name, _ in PALETTE}

DETECTION_CATEGORIES = [
    "airplane", "ship", "storage tank", "baseball diamond", "tennis court", "basketball court",
    "ground track field", "harbor", "bridge", "large vehicle", "small vehicle", "helicopter",
    "roundabout", "soccer ball field", "swimming pool",
]
LANDUSE_CATEGORIES = [name for _, name, _ in PALETTE]


def det(category, box, score):
    return {"category": category, "bbox": box, "score": score}


# name -> (base color, list of (class, rect or ("circle", cx, cy, r))), detections, scene, caption
IMAGES = {
    "airport": dict(
        base=(150, 140, 120),
        regions=[("road", (0, 0, 59, 59)), ("building", (70, 0, 99, 19))],
        detections=[det("airplane", [5, 5, 15, 15], 0.9), det("airplane", [45, 45, 55, 55], 0.9),
                    det("airplane", [85, 85, 95, 95], 0.9)],
        scene=("airport", 0.97),
        caption="an airport with runways and several airplanes",
    ),
    "harbor": dict(
        base=(120, 130, 110),
        regions=[("building", (0, 0, 99, 29)), ("water", (0, 50, 99, 99))],
        detections=[det("ship", [10, 60, 20, 70], 0.88), det("ship", [30, 60, 40, 70], 0.86),
                    det("ship", [50, 75, 60, 85], 0.84), det("ship", [70, 60, 80, 70], 0.8)],
        scene=("port", 0.93),
        caption="a harbor with ships next to buildings",
    ),
    "lake": dict(
        base=(90, 120, 80),
        regions=[("water", ("circle", 50, 50, 25)), ("forest", (85, 0, 99, 99))],
        detections=[],
        scene=("pond", 0.9),
        caption="a lake surrounded by grass and trees",
    ),
    "park": dict(
        base=(100, 150, 90),
        regions=[("barren", (0, 0, 19, 99)), ("forest", (20, 80, 99, 99))],
        detections=[det("baseball diamond", [30, 30, 70, 70], 0.88),
                    det("tennis court", [75, 10, 90, 25], 0.7)],
        scene=("baseball field", 0.91),
        caption="a park with a baseball field",
    ),
    "city": dict(
        base=(140, 140, 140),
        regions=[("building", (0, 0, 39, 39)), ("road", (40, 0, 59, 99)), ("agriculture", (70, 60, 99, 99))],
        detections=[det("small vehicle", [42, 5, 46, 9], 0.8), det("small vehicle", [52, 15, 56, 19], 0.8),
                    det("small vehicle", [42, 35, 46, 39], 0.8), det("small vehicle", [52, 55, 56, 59], 0.8),
                    det("small vehicle", [42, 75, 46, 79], 0.8), det("large vehicle", [50, 85, 58, 95], 0.75)],
        scene=("dense residential", 0.85),
        caption="a dense city block with a road and vehicles",
    ),
    "port": dict(
        base=(110, 120, 120),
        regions=[("water", (0, 0, 99, 49)), ("building", (0, 70, 99, 99))],
        detections=[det("ship", [20, 20, 35, 30], 0.9), det("ship", [60, 10, 75, 20], 0.9),
                    det("harbor", [0, 45, 99, 60], 0.7)],
        scene=("port", 0.95),
        caption="a port with two ships at the docks",
    ),
    "suburb": dict(
        base=(130, 125, 115),
        regions=[("building", (10, 10, 30, 30)), ("building", (60, 10, 80, 30)),
                 ("road", (0, 40, 99, 49)), ("forest", (0, 70, 99, 99))],
        detections=[],
        scene=("sparse residential", 0.88),
        caption="houses along a road next to a forest",
    ),
    "farm": dict(
        base=(160, 150, 100),
        regions=[("agriculture", (5, 5, 45, 45)), ("agriculture", (55, 55, 95, 95)), ("barren", (60, 0, 99, 30))],
        detections=[],
        scene=("farmland", 0.94),
        caption="farmland with rectangular fields",
    ),
}


def draw_mask(regions):
    mask = Image.new("L", (SIZE, SIZE), 0)
    d = ImageDraw.Draw(mask)
    for cls, shape in regions:
        v = CLASS[cls]
        if shape[0] == "circle":
            _, cx, cy, r = shape
            for y in range(SIZE):
                for x in range(SIZE):
                    if (x - cx) ** 2 + (y - cy) ** 2 <= r * r:
                        mask.putpixel((x, y), v)
        else:
            d.rectangle(shape, fill=v)
    return mask


def draw_image(spec, mask):
    img = Image.new("RGB", (SIZE, SIZE), spec["base"])
    px = img.load()
    m = mask.load()
    for y in range(SIZE):
        for x in range(SIZE):
            if m[x, y]:
                c = PALETTE[m[x, y]][2]
                px[x, y] = tuple((a + b) // 2 for a, b in zip(c, spec["base"]))
    d = ImageDraw.Draw(img)
    for det_ in spec["detections"]:
        d.rectangle([int(v) for v in det_["bbox"]], fill=(245, 245, 245), outline=(20, 20, 20))
    return img


def classes_present(mask):
    present = set(mask.tobytes())
    return ", ".join(name for cid, name, _ in PALETTE if cid in present)


def rx(text):
    return "".join("\\" + c if c in "\\.+*?()|[]{}^$" else c for c in text)


def action(thought, tool, **inputs):
    return f"Thought: {thought}\nAction: {tool}\nAction Input: {json.dumps(inputs)}"


def final(text):
    return f"Final Answer: {text}"


def img(stem):
    return f"u000_{stem}.png"


MASK = "s000_landuse_landuse_classification.png"

# (id, query, essential task, image, first reply)
QUERIES = [
    ("q01", "What kind of scene is shown in this image?", "scene_classification", "airport",
     action("The scene classifier answers this.", "scene_classification", image=img("airport"))),
    ("q02", "Classify the scene type of the harbor picture.", "scene_classification", "harbor",
     action("Use the scene classifier.", "scene_classification", image=img("harbor"))),
    ("q03", "Which scene category does this lake image belong to?", "scene_classification", "lake",
     action("Use the scene classifier.", "scene_classification", image=img("lake"))),
    ("q04", "Segment the land use of this city image.", "landuse_classification", "city",
     action("Land use segmentation is needed.", "landuse_classification", image=img("city"))),
    ("q05", "Where is the water in this harbor image?", "landuse_classification", "harbor",
     action("Segment the land cover to find water.", "landuse_classification", image=img("harbor"), category="water")),
    ("q06", "Which land cover classes appear in the park image?", "landuse_classification", "park",
     action("Segment the land cover.", "landuse_classification", image=img("park"))),
    ("q07", "locate the baseball diamond in the aerial image provided", "object_detection", "park",
     action("Detect baseball diamonds.", "object_detection", image=img("park"), category="baseball diamond")),
    ("q08", "Find all the ships in the harbor.", "object_detection", "harbor",
     action("Detect ships.", "object_detection", image=img("harbor"), category="ship")),
    ("q09", "Detect the airplanes in this picture.", "object_detection", "airport",
     action("Detect airplanes.", "object_detection", image=img("airport"), category="airplane")),
    ("q10", "Describe this image.", "image_captioning", "airport",
     action("Caption the image.", "image_captioning", image=img("airport"))),
    ("q11", "Write a caption for the lake image.", "image_captioning", "lake",
     action("Caption the image.", "image_captioning", image=img("lake"))),
    ("q12", "Give me a short description of this picture.", "image_captioning", "harbor",
     action("Caption the image.", "image_captioning", image=img("harbor"))),
    ("q13", "Extract the edges of this image.", "edge_detection", "airport",
     action("Run edge detection.", "edge_detection", image=img("airport"))),
    ("q14", "Run an edge detector on the lake picture.", "edge_detection", "lake",
     action("Run edge detection.", "edge_detection", image=img("lake"))),
    ("q15", "Show the boundaries of objects using edge detection.", "edge_detection", "park",
     action("Run edge detection.", "edge_detection", image=img("park"))),
    ("q16", "Give me the outline of the water areas as polygons.", "polygonization", "lake",
     action("First segment the water.", "landuse_classification", image=img("lake"), category="water")),
    ("q17", "Convert the road regions into polygons.", "polygonization", "suburb",
     action("First segment the roads.", "landuse_classification", image=img("suburb"), category="road")),
    ("q18", "Vectorize the agricultural fields.", "polygonization", "farm",
     action("First segment the fields.", "landuse_classification", image=img("farm"), category="agriculture")),
    ("q19", "Count the number of airplanes on the runway", "object_counting", "airport",
     action("First segment the runway, which is the road class.", "landuse_classification",
            image=img("airport"), category="road")),
    ("q20", "How many ships are docked at the port?", "object_counting", "port",
     action("Detect ships first.", "object_detection", image=img("port"), category="ship")),
    ("q21", "Count the small vehicles in this city image.", "object_counting", "city",
     action("Detect vehicles first.", "object_detection", image=img("city"), category="small vehicle")),
]

SABOTAGED = {
    "q01": final("It looks like an airport."),
    "q09": final("There are some airplanes."),
    "q13": final("The edges are along the runway."),
}


def observation_rules(masks):
    """Replies keyed on the observation text; step numbers disambiguate chains."""
    cp = {stem: classes_present(m) for stem, m in masks.items()}
    rules = []

    def on_landuse(stem, reply):
        rules.append((r"(?m)^Observation: \[step 0\] landuse_classification finished\.\n- classes_present = "
                      + rx(cp[stem]) + "$", reply))

    on_landuse("lake", action("Polygonize the water class.", "polygonization", mask=MASK, category="water"))
    on_landuse("suburb", action("Polygonize the road class.", "polygonization", mask=MASK, category="road"))
    on_landuse("farm", action("Polygonize the agriculture class.", "polygonization", mask=MASK,
                              category="agriculture"))
    on_landuse("airport", action("Now detect the airplanes.", "object_detection", image=img("airport"),
                                 category="airplane"))
    rules.append((r"^Observation: \[step 1\] object_detection finished\.\n- 3 objects detected \(airplane: 3\)",
                  action("Count airplanes whose centers lie on the runway.", "object_counting",
                         detections="s001_det_object_detection.json", category="airplane",
                         region_mask=MASK, region_class="road")))
    rules.append((r"^Observation: \[step 0\] object_detection finished\.\n- 2 objects detected \(ship: 2\)",
                  action("Count the ships.", "object_counting", detections="s000_det_object_detection.json",
                         category="ship")))
    rules.append((r"^Observation: \[step 0\] object_detection finished\.\n- 5 objects detected \(small vehicle: 5\)",
                  action("Count the small vehicles.", "object_counting",
                         detections="s000_det_object_detection.json", category="small vehicle")))
    rules.append((r"^Observation: \[step 2\] object_counting finished\.\n- count = 2$",
                  final("There are 2 airplanes on the runway.")))
    rules.append((r"^Observation: \[step 1\] object_counting finished\.\n- count = 2$",
                  final("There are 2 ships docked at the port.")))
    rules.append((r"^Observation: \[step 1\] object_counting finished\.\n- count = 5$",
                  final("There are 5 small vehicles.")))
    rules.append((r"^Observation: \[step 1\] polygonization finished\.",
                  final("The polygons are in s001_polygons_polygonization.json.")))
    rules.append((r"^Observation:", final("Done; see the observation above.")))
    return rules


def write_script(path, queries, rules, overrides):
    entries = []
    for qid, query, _, _, reply in queries:
        entries.append({"pattern": "^" + rx(query) + "$", "response": overrides.get(qid, reply)})
    for pattern, reply in rules:
        entries.append({"pattern": pattern, "response": reply})
    lines = []
    for e in entries:
        lines.append(f"- pattern: {json.dumps(e['pattern'])}")
        lines.append(f"  response: {json.dumps(e['response'])}")
    path.write_text("\n".join(lines) + "\n")


def main():
    masks = {}
    manifest = {
        "categories": {
            "object_detection": DETECTION_CATEGORIES,
            "landuse_classification": LANDUSE_CATEGORIES,
        },
        "images": [],
    }
    for stem, spec in IMAGES.items():
        mask = draw_mask(spec["regions"])
        masks[stem] = mask
        draw_image(spec, mask).save(HERE / f"{stem}.png")
        mask.save(HERE / f"{stem}_landuse.png")
        label, conf = spec["scene"]
        manifest["images"].append({
            "image": f"{stem}.png",
            "scene": {"label": label, "confidence": conf},
            "caption": spec["caption"],
            "detections": spec["detections"],
            "landuse": {
                "mask": f"{stem}_landuse.png",
                "palette": {"classes": [{"id": c, "name": n, "color": col} for c, n, col in PALETTE]},
            },
        })
    (HERE / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    with open(HERE / "queries.jsonl", "w") as f:
        for qid, query, task, image, _ in QUERIES:
            f.write(json.dumps({"id": qid, "query": query, "essential_task": task, "image": f"{image}.png"}) + "\n")

    rules = observation_rules(masks)
    write_script(HERE / "script.yaml", QUERIES, rules, {})
    write_script(HERE / "script_sabotaged.yaml", QUERIES, rules, SABOTAGED)

    runway = [
        action("First segment the runway, which is the road class.", "landuse_classification",
               image=img("airport"), category="road"),
        action("Now detect the airplanes.", "object_detection", image=img("airport"), category="airplane"),
        action("Count airplanes whose centers lie on the runway.", "object_counting",
               detections="s001_det_object_detection.json", category="airplane", region_mask=MASK,
               region_class="road"),
        final("There are 2 airplanes on the runway."),
    ]
    (HERE / "runway_script.yaml").write_text("".join(f"- {json.dumps(r)}\n" for r in runway))


if __name__ == "__main__":
    main()
