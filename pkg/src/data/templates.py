"""
Shipped query and template lists.

DEFAULT_QUERIES are the five LLM queries used for ImageNet-style class
descriptions. IMAGENET_TEMPLATES are the standard 80 CLIP prompts, and
ATTRIBUTE_TEMPLATES describe common image attributes such as blur,
rotation or lighting.
"""

from .records import QueryTemplate

DEFAULT_INPUT_TEMPLATE = "a photo of a {CLS}"

DEFAULT_QUERIES = (
    "Describe what a(n) {CLS} looks like.",
    "How can you identify a(n) {CLS}?",
    "What does a(n) {CLS} look like?",
    "Describe an image from the internet of a(n) {CLS}.",
    "A caption of an image of a(n) {CLS}.",
)

IMAGENET_TEMPLATES = (
    "a bad photo of a {CLS}.",
    "a photo of many {CLS}.",
    "a sculpture of a {CLS}.",
    "a photo of the hard to see {CLS}.",
    "a low resolution photo of the {CLS}.",
    "a rendering of a {CLS}.",
    "graffiti of a {CLS}.",
    "a bad photo of the {CLS}.",
    "a cropped photo of the {CLS}.",
    "a tattoo of a {CLS}.",
    "the embroidered {CLS}.",
    "a photo of a hard to see {CLS}.",
    "a bright photo of a {CLS}.",
    "a photo of a clean {CLS}.",
    "a photo of a dirty {CLS}.",
    "a dark photo of the {CLS}.",
    "a drawing of a {CLS}.",
    "a photo of my {CLS}.",
    "the plastic {CLS}.",
    "a photo of the cool {CLS}.",
    "a close-up photo of a {CLS}.",
    "a black and white photo of the {CLS}.",
    "a painting of the {CLS}.",
    "a painting of a {CLS}.",
    "a pixelated photo of the {CLS}.",
    "a sculpture of the {CLS}.",
    "a bright photo of the {CLS}.",
    "a cropped photo of a {CLS}.",
    "a plastic {CLS}.",
    "a photo of the dirty {CLS}.",
    "a jpeg corrupted photo of a {CLS}.",
    "a blurry photo of the {CLS}.",
    "a photo of the {CLS}.",
    "a good photo of the {CLS}.",
    "a rendering of the {CLS}.",
    "a {CLS} in a video game.",
    "a photo of one {CLS}.",
    "a doodle of a {CLS}.",
    "a close-up photo of the {CLS}.",
    "a photo of a {CLS}.",
    "the origami {CLS}.",
    "the {CLS} in a video game.",
    "a sketch of a {CLS}.",
    "a doodle of the {CLS}.",
    "a origami {CLS}.",
    "a low resolution photo of a {CLS}.",
    "the toy {CLS}.",
    "a rendition of the {CLS}.",
    "a photo of the clean {CLS}.",
    "a photo of a large {CLS}.",
    "a rendition of a {CLS}.",
    "a photo of a nice {CLS}.",
    "a photo of a weird {CLS}.",
    "a blurry photo of a {CLS}.",
    "a cartoon {CLS}.",
    "art of a {CLS}.",
    "a sketch of the {CLS}.",
    "a embroidered {CLS}.",
    "a pixelated photo of a {CLS}.",
    "itap of the {CLS}.",
    "a jpeg corrupted photo of the {CLS}.",
    "a good photo of a {CLS}.",
    "a plushie {CLS}.",
    "a photo of the nice {CLS}.",
    "a photo of the small {CLS}.",
    "a photo of the weird {CLS}.",
    "the cartoon {CLS}.",
    "art of the {CLS}.",
    "a drawing of the {CLS}.",
    "a photo of the large {CLS}.",
    "a black and white photo of a {CLS}.",
    "the plushie {CLS}.",
    "a dark photo of a {CLS}.",
    "itap of a {CLS}.",
    "graffiti of the {CLS}.",
    "a toy {CLS}.",
    "itap of my {CLS}.",
    "a photo of a cool {CLS}.",
    "a photo of a small {CLS}.",
    "a tattoo of the {CLS}.",
)

ATTRIBUTE_TEMPLATES = (
    "a photo of a {CLS}.",
    "a blurry photo of a {CLS}.",
    "a sharp photo of a {CLS}.",
    "a rotated photo of a {CLS}.",
    "an upside down photo of a {CLS}.",
    "a tilted photo of a {CLS}.",
    "a bright photo of a {CLS}.",
    "a dark photo of a {CLS}.",
    "an overexposed photo of a {CLS}.",
    "an underexposed photo of a {CLS}.",
    "a noisy photo of a {CLS}.",
    "a grainy photo of a {CLS}.",
    "a low contrast photo of a {CLS}.",
    "a high contrast photo of a {CLS}.",
    "a black and white photo of a {CLS}.",
    "a colorful photo of a {CLS}.",
    "a close-up photo of a {CLS}.",
    "a photo of a {CLS} taken from far away.",
    "a photo of a {CLS} from above.",
    "a photo of a {CLS} from below.",
    "a photo of a {CLS} from the side.",
    "a cropped photo of a {CLS}.",
    "a photo of a partially hidden {CLS}.",
    "a photo of a small {CLS}.",
    "a photo of a large {CLS}.",
    "a photo of a {CLS} in the center.",
    "a photo of a {CLS} in the corner.",
    "a photo of a {CLS} on a plain background.",
    "a photo of a {CLS} on a cluttered background.",
    "a photo of a {CLS} indoors.",
    "a photo of a {CLS} outdoors.",
    "a photo of a {CLS} at night.",
    "a photo of a {CLS} in daylight.",
    "a photo of a {CLS} in the rain.",
    "a photo of a {CLS} in the snow.",
    "a photo of a {CLS} in fog.",
    "a photo of a {CLS} with motion blur.",
    "a photo of a {CLS} out of focus.",
    "a pixelated photo of a {CLS}.",
    "a jpeg compressed photo of a {CLS}.",
    "a low resolution photo of a {CLS}.",
    "a high resolution photo of a {CLS}.",
    "a photo of a {CLS} with a shadow.",
    "a photo of a {CLS} with a reflection.",
    "a photo of many {CLS}.",
    "a photo of one {CLS}.",
)


def as_queries(texts: tuple[str, ...] | list[str]) -> list[QueryTemplate]:
    """Wraps template strings into numbered QueryTemplates."""
    return [QueryTemplate(text, index) for index, text in enumerate(texts)]
