//! Ground-truth labels and administrative levels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::GeoError;

/// Administrative level of a location label, from coarsest to finest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Country,
    Province,
    City,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Country, Level::Province, Level::City];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Country => "country",
            Level::Province => "province",
            Level::City => "city",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Imagery source of a benchmark sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    Photo,
    Panorama,
    Satellite,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::Panorama, DataType::Photo, DataType::Satellite];

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Photo => "photo",
            DataType::Panorama => "panorama",
            DataType::Satellite => "satellite",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Alternative spellings accepted per level, e.g. "NYC" for "New York City".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAliases {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub country: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub province: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub city: Vec<String>,
}

impl LevelAliases {
    pub fn is_empty(&self) -> bool {
        self.country.is_empty() && self.province.is_empty() && self.city.is_empty()
    }

    pub fn get(&self, level: Level) -> &[String] {
        match level {
            Level::Country => &self.country,
            Level::Province => &self.province,
            Level::City => &self.city,
        }
    }

    fn get_mut(&mut self, level: Level) -> &mut Vec<String> {
        match level {
            Level::Country => &mut self.country,
            Level::Province => &mut self.province,
            Level::City => &mut self.city,
        }
    }
}

/// Ground-truth location of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoLabel {
    country: String,
    province: String,
    city: String,
    point: GeoPoint,
    #[serde(default, skip_serializing_if = "LevelAliases::is_empty")]
    aliases: LevelAliases,
}

impl GeoLabel {
    /// Builds a label. Names are trimmed and must be non-empty; any non-empty
    /// alias list is completed with its canonical name.
    pub fn new(
        country: &str,
        province: &str,
        city: &str,
        point: GeoPoint,
        mut aliases: LevelAliases,
    ) -> Result<Self, GeoError> {
        let names = [country.trim(), province.trim(), city.trim()];
        for (level, name) in Level::ALL.iter().zip(names) {
            if name.is_empty() {
                return Err(GeoError::InvalidLabel(format!("{level} name is empty")));
            }
            let list = aliases.get_mut(*level);
            list.retain(|a| !a.trim().is_empty());
            if !list.is_empty() && !list.iter().any(|a| a.trim() == name) {
                list.insert(0, name.to_string());
            }
        }
        Ok(Self {
            country: names[0].to_string(),
            province: names[1].to_string(),
            city: names[2].to_string(),
            point,
            aliases,
        })
    }

    pub fn name(&self, level: Level) -> &str {
        match level {
            Level::Country => &self.country,
            Level::Province => &self.province,
            Level::City => &self.city,
        }
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn province(&self) -> &str {
        &self.province
    }

    pub fn city(&self) -> &str {
        &self.city
    }

    pub fn point(&self) -> GeoPoint {
        self.point
    }

    pub fn aliases(&self) -> &LevelAliases {
        &self.aliases
    }

    /// Canonical name followed by every alias for `level`, without duplicates.
    pub fn accepted_names(&self, level: Level) -> Vec<&str> {
        let mut names = vec![self.name(level)];
        for alias in self.aliases.get(level) {
            let alias = alias.trim();
            if !names.contains(&alias) {
                names.push(alias);
            }
        }
        names
    }
}
