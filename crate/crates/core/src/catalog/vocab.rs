use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numerics::SeededRng;
use crate::{Error, Result};

pub const GENDER: &str = "gender";
pub const CATEGORY: &str = "category";
pub const COLOR: &str = "color";
pub const MATERIAL: &str = "material";
pub const PATTERN: &str = "pattern";
pub const BRAND: &str = "brand";

pub const GENDERS: [&str; 2] = ["men", "women"];

/// Product families; categories belong to exactly one, and category-specific
/// attributes are attached per family.
pub const FAMILIES: [&str; 4] = ["footwear", "topwear", "bottomwear", "accessories"];

const FAMILY_CATEGORIES: [&[&str]; 4] = [
    &[
        "shoes", "sandals", "sneakers", "boots", "loafers", "flip flops", "heels", "slippers",
        "running shoes", "formal shoes", "clogs", "moccasins", "espadrilles", "mules",
        "oxfords", "brogues", "derby shoes", "ballerinas", "wedges", "flats", "sports shoes",
        "trekking shoes", "floaters", "juttis", "kolhapuris", "boat shoes", "chelsea boots",
        "ankle boots", "kitten heels", "stilettos", "gladiators", "slides", "monk shoes",
    ],
    &[
        "tops", "shirts", "dresses", "t-shirts", "sweaters", "jackets", "kurtas", "blazers",
        "hoodies", "sweatshirts", "tunics", "polo shirts", "cardigans", "coats", "waistcoats",
        "camisoles", "crop tops", "shrugs", "kurtis", "jumpsuits", "gowns", "blouses",
        "tank tops", "vests", "sherwanis", "nehru jackets", "rain jackets", "windcheaters",
        "pullovers", "bodysuits", "kaftans", "ponchos",
    ],
    &[
        "trousers", "jeans", "skirts", "shorts", "leggings", "track pants", "chinos",
        "capris", "palazzos", "joggers", "cargos", "dhotis", "salwars", "churidars",
        "jeggings", "culottes", "harem pants", "dungarees", "bermudas", "lungis",
        "patiala pants", "treggings", "sharara pants", "hotpants", "boardshorts",
        "pyjamas", "lounge pants", "trunks", "tights", "sarongs", "lehenga skirts",
        "pleated skirts",
    ],
    &[
        "bags", "belts", "watches", "wallets", "sunglasses", "caps", "scarves", "ties",
        "backpacks", "handbags", "clutches", "socks", "gloves", "stoles", "mufflers",
        "hats", "cufflinks", "bracelets", "earrings", "necklaces", "rings", "anklets",
        "hairbands", "umbrellas", "suspenders", "pocket squares", "laptop bags",
        "duffle bags", "sling bags", "keychains", "bow ties", "beanies", "headbands",
    ],
];

const COLORS: &[&str] = &[
    "red", "blue", "black", "white", "green", "yellow", "pink", "grey", "brown", "navy",
    "sky blue", "peach", "violet", "orange", "maroon", "beige", "olive", "purple", "teal",
    "gold", "silver", "cream", "khaki", "magenta", "turquoise", "lavender", "coral",
    "mustard", "rust", "charcoal", "tan", "burgundy", "mint", "lime", "off white",
    "copper", "bronze", "fuchsia", "indigo", "aqua", "nude", "taupe", "mauve", "wine",
    "sea green", "steel blue",
];

const MATERIALS: &[&str] = &[
    "leather", "cotton", "jute", "silk", "denim", "wool", "linen", "polyester", "nylon",
    "suede", "canvas", "rayon", "velvet", "chiffon", "georgette", "satin", "synthetic",
    "rubber", "mesh", "fleece", "corduroy", "crepe", "khadi", "viscose", "lycra",
    "patent leather", "faux leather", "nubuck", "acrylic", "cashmere", "muslin", "organza",
    "tweed", "modal", "spandex", "chambray", "poplin", "twill", "jersey", "terry",
    "neoprene", "pu", "eva", "cork", "bamboo", "hemp", "lace", "net", "tulle",
    "brocade", "chanderi", "tussar", "crochet", "raffia", "straw", "metal", "plastic",
    "glass", "wood", "ceramic", "resin", "sequinned fabric", "faux fur", "shearling",
    "microfibre",
];

const PATTERNS: &[&str] = &[
    "solid", "floral", "woven design", "embellished", "checkered", "striped", "printed",
    "polka dots", "geometric", "abstract", "paisley", "animal print", "camouflage",
    "colourblocked", "embroidered", "self design", "tie and dye",
];

const BRANDS: &[&str] = &[
    "john players", "reebok", "109f", "adidas", "puma", "nike", "bata", "woodland",
    "levis", "wrangler",
];

const BRAND_SYLLABLES: &[&str] = &[
    "ka", "lo", "vi", "ra", "mo", "zen", "tor", "bel", "quin", "dra", "fe", "lux",
    "no", "sa", "tri", "van", "el", "or", "pix", "sol",
];

struct SpecificAttribute {
    name: &'static str,
    families: &'static [&'static str],
    values: &'static [&'static str],
}

const SPECIFIC_ATTRIBUTES: [SpecificAttribute; 11] = [
    SpecificAttribute {
        name: "sleeves",
        families: &["topwear"],
        values: &["full sleeves", "half sleeves", "sleeveless", "three-quarter sleeves", "cap sleeves"],
    },
    SpecificAttribute {
        name: "heel",
        families: &["footwear"],
        values: &["flat heel", "low heel", "mid heel", "high heel", "wedge heel", "platform heel"],
    },
    SpecificAttribute {
        name: "fit",
        families: &["topwear", "bottomwear"],
        values: &["slim fit", "regular fit", "loose fit", "skinny fit", "relaxed fit"],
    },
    SpecificAttribute {
        name: "closure",
        families: &["footwear", "accessories"],
        values: &["lace-up", "slip-on", "buckle", "velcro", "zip", "snap button"],
    },
    SpecificAttribute {
        name: "neck",
        families: &["topwear"],
        values: &["round neck", "v-neck", "collared", "boat neck", "high neck", "mandarin collar"],
    },
    SpecificAttribute {
        name: "length",
        families: &["bottomwear", "topwear"],
        values: &["ankle length", "knee length", "mini length", "maxi length", "midi length"],
    },
    SpecificAttribute {
        name: "sole",
        families: &["footwear"],
        values: &["rubber sole", "leather sole", "eva sole", "pu sole", "tpr sole"],
    },
    SpecificAttribute {
        name: "occasion",
        families: &["footwear", "topwear", "bottomwear", "accessories"],
        values: &["casual", "formal", "party", "sports", "ethnic", "beach"],
    },
    SpecificAttribute {
        name: "rise",
        families: &["bottomwear"],
        values: &["low rise", "mid rise", "high rise"],
    },
    SpecificAttribute {
        name: "strap",
        families: &["accessories", "footwear"],
        values: &["single strap", "double strap", "chain strap", "adjustable strap", "t-strap"],
    },
    SpecificAttribute {
        name: "toe",
        families: &["footwear"],
        values: &["round toe", "pointed toe", "open toe", "square toe", "peep toe"],
    },
];

/// Size of each part of the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub categories: usize,
    pub colors: usize,
    pub materials: usize,
    pub patterns: usize,
    pub brands: usize,
    /// Number of category-specific attribute types (at most 11).
    pub specific_attributes: usize,
    /// Total number of values across the category-specific attributes.
    pub specific_values: usize,
}

impl VocabConfig {
    /// Table-scale vocabulary: 130 categories, 17 attribute types and 501
    /// attribute values, 648 tokens in total.
    pub fn full() -> Self {
        Self {
            categories: 130,
            colors: 46,
            materials: 65,
            patterns: 17,
            brands: 160,
            specific_attributes: 11,
            specific_values: 211,
        }
    }

    /// Roughly one tenth of [`full`](Self::full).
    pub fn desk() -> Self {
        Self {
            categories: 12,
            colors: 8,
            materials: 6,
            patterns: 4,
            brands: 10,
            specific_attributes: 4,
            specific_values: 12,
        }
    }

    /// Smallest valid vocabulary.
    pub fn minimal() -> Self {
        Self {
            categories: 1,
            colors: 1,
            materials: 1,
            patterns: 1,
            brands: 1,
            specific_attributes: 0,
            specific_values: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("categories", self.categories),
            ("colors", self.colors),
            ("materials", self.materials),
            ("patterns", self.patterns),
            ("brands", self.brands),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("vocabulary needs at least one of {name}")));
            }
        }
        if self.specific_attributes > SPECIFIC_ATTRIBUTES.len() {
            return Err(Error::Config(format!(
                "at most {} category-specific attributes are supported",
                SPECIFIC_ATTRIBUTES.len()
            )));
        }
        if self.specific_values < self.specific_attributes {
            return Err(Error::Config(
                "every category-specific attribute needs at least one value".into(),
            ));
        }
        if self.specific_attributes == 0 && self.specific_values > 0 {
            return Err(Error::Config(
                "specific values given without specific attributes".into(),
            ));
        }
        Ok(())
    }
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// What a vocabulary token denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind<'a> {
    /// The name of an attribute type, e.g. `color`.
    AttributeName(&'a str),
    /// A value of an attribute, e.g. (`color`, `red`). Categories are values
    /// of [`CATEGORY`] and genders values of [`GENDER`].
    Value { attribute: &'a str, token: &'a str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VocabularyRepr {
    attributes: Vec<String>,
    values: BTreeMap<String, Vec<String>>,
    applicability: BTreeMap<String, Vec<String>>,
    families: BTreeMap<String, String>,
}

/// Standardised fashion vocabulary.
///
/// `values[category]` lists the categories and `values[gender]` the genders;
/// `applicability[c]` lists the attributes (other than gender and category)
/// that products of category `c` carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    repr: VocabularyRepr,
    // token -> (attribute, is attribute name)
    lookup: BTreeMap<String, (String, bool)>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(repr: VocabularyRepr) -> Result<Self> {
        let mut lookup = BTreeMap::new();
        let mut insert = |token: &str, attribute: &str, is_name: bool| -> Result<()> {
            if lookup
                .insert(token.to_string(), (attribute.to_string(), is_name))
                .is_some()
            {
                return Err(Error::Config(format!("duplicate vocabulary token `{token}`")));
            }
            Ok(())
        };
        for attr in &repr.attributes {
            insert(attr, attr, true)?;
        }
        for attr in [GENDER, CATEGORY] {
            if !repr.attributes.iter().any(|a| a == attr) {
                return Err(Error::Config(format!("vocabulary lacks the `{attr}` attribute")));
            }
        }
        for (attr, tokens) in &repr.values {
            if !repr.attributes.contains(attr) {
                return Err(Error::UnknownAttribute(attr.clone()));
            }
            if tokens.is_empty() {
                return Err(Error::Config(format!("attribute `{attr}` has no values")));
            }
            for t in tokens {
                insert(t, attr, false)?;
            }
        }
        for attr in &repr.attributes {
            if !repr.values.contains_key(attr) {
                return Err(Error::Config(format!("attribute `{attr}` has no values")));
            }
        }
        let categories: BTreeSet<&String> = repr.values[CATEGORY].iter().collect();
        for cat in &categories {
            let applicable = repr
                .applicability
                .get(*cat)
                .ok_or_else(|| Error::Config(format!("category `{cat}` has no applicable attributes")))?;
            if applicable.is_empty() {
                return Err(Error::Config(format!("category `{cat}` has no applicable attributes")));
            }
            for a in applicable {
                if a == GENDER || a == CATEGORY || !repr.attributes.contains(a) {
                    return Err(Error::Config(format!(
                        "category `{cat}` lists invalid attribute `{a}`"
                    )));
                }
            }
            if !repr.families.contains_key(*cat) {
                return Err(Error::Config(format!("category `{cat}` has no family")));
            }
        }
        for cat in repr.applicability.keys() {
            if !categories.contains(cat) {
                return Err(Error::Config(format!("applicability lists unknown category `{cat}`")));
            }
        }
        Ok(Self { repr, lookup })
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        v.repr
    }
}

impl Vocabulary {
    /// Attribute names in canonical order; gender and category come first.
    pub fn attributes(&self) -> &[String] {
        &self.repr.attributes
    }

    pub fn values(&self, attribute: &str) -> Option<&[String]> {
        self.repr.values.get(attribute).map(Vec::as_slice)
    }

    pub fn categories(&self) -> &[String] {
        &self.repr.values[CATEGORY]
    }

    pub fn genders(&self) -> &[String] {
        &self.repr.values[GENDER]
    }

    /// Attributes carried by products of `category` (gender and category
    /// excluded).
    pub fn applicable(&self, category: &str) -> Option<&[String]> {
        self.repr.applicability.get(category).map(Vec::as_slice)
    }

    pub fn is_applicable(&self, category: &str, attribute: &str) -> bool {
        self.applicable(category)
            .is_some_and(|a| a.iter().any(|x| x == attribute))
    }

    pub fn family(&self, category: &str) -> Option<&str> {
        self.repr.families.get(category).map(String::as_str)
    }

    pub fn categories_in_family<'a>(&'a self, family: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.categories()
            .iter()
            .filter(move |c| self.family(c) == Some(family))
    }

    pub fn kind(&self, token: &str) -> Option<TokenKind<'_>> {
        let (key, (attr, is_name)) = self.lookup.get_key_value(token)?;
        Some(if *is_name {
            TokenKind::AttributeName(attr)
        } else {
            TokenKind::Value {
                attribute: attr,
                token: key,
            }
        })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup.contains_key(token)
    }

    /// Is `token` a value of `attribute`?
    pub fn has_value(&self, attribute: &str, token: &str) -> bool {
        matches!(self.lookup.get(token), Some((a, false)) if a == attribute)
    }

    /// Every token (attribute names, categories and values), sorted.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lookup.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }
}

/// Builds a vocabulary of the requested size. Real fashion terms are used
/// first; larger sizes are filled with generated names (brands from random
/// syllables, everything else numbered).
pub fn build_vocabulary(config: &VocabConfig, rng: &mut SeededRng) -> Result<Vocabulary> {
    config.validate()?;

    let specific = &SPECIFIC_ATTRIBUTES[..config.specific_attributes];
    let mut attributes: Vec<String> = [GENDER, CATEGORY, COLOR, MATERIAL, PATTERN, BRAND]
        .iter()
        .map(|s| s.to_string())
        .collect();
    attributes.extend(specific.iter().map(|s| s.name.to_string()));

    let mut values = BTreeMap::new();
    values.insert(GENDER.to_string(), GENDERS.iter().map(|s| s.to_string()).collect());

    // Categories are dealt round-robin over the families.
    let mut categories = Vec::with_capacity(config.categories);
    let mut families = BTreeMap::new();
    for i in 0..config.categories {
        let f = i % FAMILIES.len();
        let slot = i / FAMILIES.len();
        let name = FAMILY_CATEGORIES[f]
            .get(slot)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("{} style {}", FAMILIES[f], slot + 1));
        families.insert(name.clone(), FAMILIES[f].to_string());
        categories.push(name);
    }
    values.insert(CATEGORY.to_string(), categories.clone());
    values.insert(COLOR.to_string(), take_names(COLORS, config.colors, COLOR));
    values.insert(MATERIAL.to_string(), take_names(MATERIALS, config.materials, MATERIAL));
    values.insert(PATTERN.to_string(), take_names(PATTERNS, config.patterns, PATTERN));
    values.insert(BRAND.to_string(), brand_names(config.brands, rng));

    let n_spec = specific.len();
    for (i, attr) in specific.iter().enumerate() {
        let count = config.specific_values / n_spec + usize::from(i < config.specific_values % n_spec);
        values.insert(attr.name.to_string(), take_names(attr.values, count, attr.name));
    }

    let mut applicability = BTreeMap::new();
    for cat in &categories {
        let family = families[cat].as_str();
        let mut attrs: Vec<String> = [COLOR, MATERIAL, PATTERN, BRAND]
            .iter()
            .map(|s| s.to_string())
            .collect();
        attrs.extend(
            specific
                .iter()
                .filter(|s| s.families.contains(&family))
                .map(|s| s.name.to_string()),
        );
        applicability.insert(cat.clone(), attrs);
    }

    Vocabulary::try_from(VocabularyRepr {
        attributes,
        values,
        applicability,
        families,
    })
}

fn take_names(real: &[&str], count: usize, attribute: &str) -> Vec<String> {
    (0..count)
        .map(|i| {
            real.get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("{attribute} {}", i + 1))
        })
        .collect()
}

fn brand_names(count: usize, rng: &mut SeededRng) -> Vec<String> {
    let mut names: Vec<String> = BRANDS.iter().take(count).map(|s| s.to_string()).collect();
    let mut seen: BTreeSet<String> = names.iter().cloned().collect();
    while names.len() < count {
        let syllables = 2 + rng.below(2);
        let mut name = String::new();
        for _ in 0..syllables {
            name.push_str(BRAND_SYLLABLES[rng.below(BRAND_SYLLABLES.len())]);
        }
        if seen.insert(name.clone()) {
            names.push(name);
        }
    }
    names
}
