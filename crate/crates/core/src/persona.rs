//! Survey participant personas: a title plus a surname, optionally tagged with
//! the name-list group the surname came from.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Persona {
    pub title: String,
    pub surname: String,
    /// Which surname list this persona was drawn from ("asian", "white", ...).
    /// Empty for personas given explicitly without a group.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub group: String,
    /// Derived from the title: "female" for Ms./Mrs./Miss, "male" for Mr.,
    /// otherwise "unspecified".
    pub gender_tag: String,
}

impl Persona {
    pub fn new(
        title: impl Into<String>,
        surname: impl Into<String>,
        group: impl Into<String>,
    ) -> Result<Self, PersonaError> {
        let title = title.into();
        let surname = surname.into();
        if title.is_empty() || surname.is_empty() {
            return Err(PersonaError::EmptyPart);
        }
        let gender_tag = derive_gender_tag(&title).to_owned();
        Ok(Self { title, surname, group: group.into(), gender_tag })
    }

    /// The string substituted into prompts, e.g. `"Ms. Kim"`.
    pub fn display(&self) -> String {
        format!("{} {}", self.title, self.surname)
    }
}

pub fn derive_gender_tag(title: &str) -> &'static str {
    match title {
        "Ms." | "Mrs." | "Miss" => "female",
        "Mr." => "male",
        _ => "unspecified",
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PersonaError {
    #[error("persona title and surname must both be non-empty")]
    EmptyPart,
}

/// One named surname list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurnameGroup {
    pub name: String,
    pub surnames: Vec<String>,
}

/// Cross product of groups, surnames, and titles, in that nesting order:
/// groups outermost, titles innermost. With titles `[Ms., Mr.]` and surnames
/// `[Garcia, Ruiz]` the order is Ms. Garcia, Mr. Garcia, Ms. Ruiz, Mr. Ruiz.
pub fn expand_personas(
    groups: &[SurnameGroup],
    titles: &[String],
) -> Result<Vec<Persona>, PersonaError> {
    let mut out = Vec::new();
    for group in groups {
        for surname in &group.surnames {
            for title in titles {
                out.push(Persona::new(title.clone(), surname.clone(), group.name.clone())?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gender_tags() {
        assert_eq!(derive_gender_tag("Ms."), "female");
        assert_eq!(derive_gender_tag("Mrs."), "female");
        assert_eq!(derive_gender_tag("Miss"), "female");
        assert_eq!(derive_gender_tag("Mr."), "male");
        assert_eq!(derive_gender_tag("Dr."), "unspecified");
        assert_eq!(derive_gender_tag("Mx."), "unspecified");
    }

    #[test]
    fn display_joins_with_space() {
        let p = Persona::new("Ms.", "Kim", "asian").unwrap();
        assert_eq!(p.display(), "Ms. Kim");
    }

    #[test]
    fn empty_parts_rejected() {
        assert_eq!(Persona::new("", "Kim", "").unwrap_err(), PersonaError::EmptyPart);
        assert_eq!(Persona::new("Ms.", "", "").unwrap_err(), PersonaError::EmptyPart);
    }

    #[test]
    fn expansion_order_titles_innermost() {
        let groups = vec![SurnameGroup {
            name: "hispanic".into(),
            surnames: vec!["Garcia".into(), "Ruiz".into()],
        }];
        let titles = vec!["Ms.".to_owned(), "Mr.".to_owned()];
        let personas = expand_personas(&groups, &titles).unwrap();
        let displays: Vec<_> = personas.iter().map(Persona::display).collect();
        assert_eq!(displays, vec!["Ms. Garcia", "Mr. Garcia", "Ms. Ruiz", "Mr. Ruiz"]);
        assert!(personas.iter().all(|p| p.group == "hispanic"));
    }

    #[test]
    fn expansion_cardinality() {
        let groups: Vec<SurnameGroup> = (0..5)
            .map(|g| SurnameGroup {
                name: format!("g{g}"),
                surnames: (0..25).map(|s| format!("S{g}_{s}")).collect(),
            })
            .collect();
        let titles = vec!["Ms.".to_owned(), "Mr.".to_owned()];
        assert_eq!(expand_personas(&groups, &titles).unwrap().len(), 250);
    }
}
