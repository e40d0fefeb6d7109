//! Prompt templates for profile augmentation and explanation generation.
//!
//! Every template is a fixed text with named slots. Rendering substitutes the
//! slots piecewise, so a rendered prompt can be split back into its slot
//! values (the stub backend relies on this).

use serde::{Deserialize, Serialize};

use super::{Domain, Polarity};
use crate::error::{Error, Result};

pub const SLOT_PROFILE_SEQ: &str = "{profile_seq}";
pub const SLOT_RECOMMENDED: &str = "{recommended_profile}";
pub const SLOT_ITEM: &str = "{item_text}";

/// Rendered in place of a padded history entry.
pub const NONE_PLACEHOLDER: &str = "none";
/// Joins history profiles, oldest first.
pub const HISTORY_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub domain: Domain,
    pub polarity: Polarity,
    pub text: String,
}

/// A piece of template text or a slot marker.
enum Piece<'a> {
    Text(&'a str),
    Slot(&'static str),
}

fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        let next = [SLOT_PROFILE_SEQ, SLOT_RECOMMENDED, SLOT_ITEM]
            .into_iter()
            .filter_map(|s| rest.find(s).map(|at| (at, s)))
            .min_by_key(|(at, _)| *at);
        match next {
            Some((at, slot)) => {
                out.push(Piece::Text(&rest[..at]));
                out.push(Piece::Slot(slot));
                rest = &rest[at + slot.len()..];
            }
            None => {
                out.push(Piece::Text(rest));
                return out;
            }
        }
    }
}

impl PromptTemplate {
    pub fn slots(&self) -> Vec<&'static str> {
        pieces(&self.text)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s),
                Piece::Text(_) => None,
            })
            .collect()
    }

    /// Substitutes `values` (slot, value) into the template. Slots absent from
    /// `values` are an error.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String> {
        let mut out = String::with_capacity(self.text.len() + 256);
        for p in pieces(&self.text) {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => {
                    let v = values
                        .iter()
                        .find(|(k, _)| *k == s)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| Error::validation(format!("slot {s} not provided")))?;
                    out.push_str(v);
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`render`](Self::render): recovers slot values in order,
    /// or `None` if `prompt` was not produced by this template.
    pub fn parse<'p>(&self, prompt: &'p str) -> Option<Vec<(&'static str, &'p str)>> {
        let ps = pieces(&self.text);
        let mut rest = prompt;
        let mut out = Vec::new();
        let mut pending: Option<&'static str> = None;
        for p in ps {
            match p {
                Piece::Slot(s) => pending = Some(s),
                Piece::Text(t) => match pending.take() {
                    None => rest = rest.strip_prefix(t)?,
                    Some(slot) => {
                        // the last text piece must close the prompt exactly
                        let at = if t.is_empty() {
                            rest.len()
                        } else {
                            rest.find(t)?
                        };
                        out.push((slot, &rest[..at]));
                        rest = &rest[at + t.len()..];
                    }
                },
            }
        }
        if let Some(slot) = pending {
            out.push((slot, rest));
            rest = "";
        }
        rest.is_empty().then_some(out)
    }
}

fn verb(domain: Domain, negative: bool) -> &'static str {
    match (domain, negative) {
        (Domain::Product, false) => "purchased this product",
        (Domain::Product, true) => "did not purchase this product",
        (Domain::Movie, false) => "watched this movie",
        (Domain::Movie, true) => "did not watch this movie",
        (Domain::Restaurant, false) => "visited this restaurant",
        (Domain::Restaurant, true) => "did not visit this restaurant",
        (Domain::Hotel, false) => "stayed at this hotel",
        (Domain::Hotel, true) => "did not stay at this hotel",
    }
}

fn history_noun(domain: Domain) -> &'static str {
    match domain {
        Domain::Product => "purchasing",
        Domain::Movie => "watching",
        Domain::Restaurant => "visiting",
        Domain::Hotel => "staying",
    }
}

const HOTEL_PROFILE_EXAMPLE_INPUT: &str = "JW Marriott Hotel Hong Kong";
const HOTEL_PROFILE_EXAMPLE_OUTPUT: &str = "Revitalize body, mind, and spirit when you stay at the 5-star JW Marriott Hotel Hong Kong. Located above Pacific Place, enjoy the views over Victoria Harbour, the mountains, or the glittering downtown Hong Kong skyline.";

const RESTAURANT_PROFILE_EXAMPLE_INPUT: &str = "Thrill Korean Steak and Bar";
const RESTAURANT_PROFILE_EXAMPLE_OUTPUT: &str = "Thrill Korean Steak and Bar brings a new concept to many people. We feature over 20 meat options to choose from that will be cooked at the table. Our fast-burning grills and our well-trained staff will bring an exceptional experience to many people.";

const MOVIE_PROFILE_INSTRUCTION: &str = "Create a succinct profile for a movie based on the provided information. This profile should be tailored for use in recommendation systems and must identify the types of users who would enjoy the movie. Avoid repeating the given details directly and instead focus on describing the appeal and content of the movie in a way that highlights its potential audience:";
const MOVIE_PROFILE_EXAMPLE_INPUT: &str = "Title: Barefoot Contessa (with Ina Garten), Entertaining With Ina Vol. 2 (3 Pack): Brunch 'n' Lunch, Picnic Parties, Summer Entertaining\n\nBrand: Ina Garten\n\nCategory: ['Movies & TV', 'Movies']";
const MOVIE_PROFILE_EXAMPLE_OUTPUT: &str = "This series, hosted by Ina Garten, delves into crafting simple yet sophisticated dishes suitable for both daily meals and special events. With episodes ranging from brunch preparations to summer picnic essentials, it appeals to those who savor lifestyle and culinary content infused with a personal touch. Ideal for viewers who relish home cooking shows, seek practical entertaining tips, and aspire to refine their cooking skills under the guidance of a celebrated chef, this series is especially attractive. Enthusiasts of lifestyle and cooking channels, as well as individuals looking for actionable, inspirational ideas for social gatherings, will find this series to be a compelling addition to their viewing schedule. It is particularly suited for culinary aficionados and home chefs eager to inject innovation and style into their meal presentations and event planning.";

const HOTEL_PAST_EXAMPLE: &str = "Peppers Gallery Hotel is a luxurious 5-star hotel located in the heart of Sydney, Australia. The hotel is housed in a historic building that has been beautifully restored to combine modern comfort with traditional elegance. The hotel's unique art collection and contemporary design make it a perfect choice for art lovers, couples, and business travelers seeking a luxurious and sophisticated experience. The hotel's central location allows guests to easily explore Sydney's famous landmarks and cultural attractions. Whether you're looking to relax and unwind or experience the best of Sydney, Peppers Gallery Hotel is the perfect choice.";
const HOTEL_CURRENT_EXAMPLE: &str = "Escape the hustle and bustle of Amsterdam and indulge in a luxurious stay at the Sheraton Amsterdam Airport Hotel and Conference Center. Conveniently located just minutes from Amsterdam Airport Schiphol, this 5-star hotel offers spacious rooms, a fitness center, and an on-site restaurant. Perfect for both business and leisure travelers seeking a comfortable and relaxing retreat.";
const HOTEL_POSITIVE_EXAMPLE: &str = "Explanation: The consumer stayed at this hotel because the consumer is traveling for business and the hotel is luxurious and conveniently located at the airport.";
const HOTEL_NEGATIVE_EXAMPLE: &str = "Explanation: The consumer did not stay at this hotel because the consumer is not interested in visiting Amsterdam or staying at an airport hotel and the hotel is located at the Amsterdam airport.";

const RESTAURANT_PAST_EXAMPLE: &str = "Claim Jumper is a restaurant that offers a unique dining experience, known for its delicious food and friendly service. The menu features a variety of dishes that are sure to please any palate. Whether you are looking for a casual dining experience or a romantic dinner for two, Claim Jumper is the perfect choice.";
const RESTAURANT_CURRENT_EXAMPLE: &str = "Feast Buffet is a hotel restaurant that offers a wide variety of international cuisine. The restaurant is perfect for families, couples, and business travelers who are looking for a delicious and affordable meal. Overall, Feast Buffet is a great option for anyone looking for a delicious and affordable meal in a comfortable and welcoming environment.";
const RESTAURANT_POSITIVE_EXAMPLE: &str = "Explanation: The consumer visited this restaurant because the consumer is looking for a romantic dining place and the restaurant offers a delicious and affordable dining experience for couples.";
const RESTAURANT_NEGATIVE_EXAMPLE: &str = "Explanation: The consumer did not visit this restaurant because the consumer is looking for a fine dinning experience and the restaurant offers only affordable and buffet options.";

fn block(instruction: &str, example_in: &str, example_out: &str, input: &str) -> String {
    format!(
        "[Instruction]\n\n{instruction}\n\n[Example Input]\n\n{example_in}\n\n[Example Output]\n\n{example_out}\n\n[Input]\n\n{input}"
    )
}

fn profile_text(domain: Domain) -> String {
    let generic = |noun: &str| {
        format!(
            "Create a succinct profile for a {noun} based on its name. This profile should be tailored for use in recommendation systems and must identify the types of consumers who would enjoy the {noun}."
        )
    };
    match domain {
        Domain::Hotel => block(
            &generic("hotel"),
            HOTEL_PROFILE_EXAMPLE_INPUT,
            HOTEL_PROFILE_EXAMPLE_OUTPUT,
            SLOT_ITEM,
        ),
        Domain::Restaurant => block(
            &generic("restaurant"),
            RESTAURANT_PROFILE_EXAMPLE_INPUT,
            RESTAURANT_PROFILE_EXAMPLE_OUTPUT,
            SLOT_ITEM,
        ),
        Domain::Movie => block(
            MOVIE_PROFILE_INSTRUCTION,
            MOVIE_PROFILE_EXAMPLE_INPUT,
            MOVIE_PROFILE_EXAMPLE_OUTPUT,
            SLOT_ITEM,
        ),
        Domain::Product => block(
            &generic("product"),
            HOTEL_PROFILE_EXAMPLE_INPUT,
            HOTEL_PROFILE_EXAMPLE_OUTPUT,
            SLOT_ITEM,
        ),
    }
}

fn explanation_text(domain: Domain, negative: bool) -> String {
    let v = verb(domain, negative);
    match domain {
        Domain::Hotel => {
            let reason = if negative { "did not stay at" } else { "stayed at" };
            block(
                &format!(
                    "Provide a reason for why this consumer {reason} the current hotel, based on the provided profile of the past hotels the consumer stayed at and the profile of the current hotel. Answer with exactly one sentence with the following format: \"The consumer {v} because the consumer ... and the hotel ...\""
                ),
                &format!("Past Hotel Profiles: {HOTEL_PAST_EXAMPLE}\n\nCurrent Hotel Profile: {HOTEL_CURRENT_EXAMPLE}"),
                if negative { HOTEL_NEGATIVE_EXAMPLE } else { HOTEL_POSITIVE_EXAMPLE },
                &format!("Past Hotel Profiles: {SLOT_PROFILE_SEQ}\n\nCurrent Hotel Profile: {SLOT_RECOMMENDED}"),
            )
        }
        Domain::Restaurant => {
            let reason = if negative { "did not visit" } else { "visited" };
            // The label says "Last" but the full history sequence fills it.
            block(
                &format!(
                    "Provide a reason for why this consumer {reason} the current restaurant, based on the provided profile of the last restaurant the consumer visited and the profile of the current restaurant. Answer with exactly one sentence with the following format: \"The consumer {v} because the consumer ... and the restaurant ...\""
                ),
                &format!("Last Restaurant Profile: {RESTAURANT_PAST_EXAMPLE}\n\nCurrent Restaurant Profile: {RESTAURANT_CURRENT_EXAMPLE}"),
                if negative { RESTAURANT_NEGATIVE_EXAMPLE } else { RESTAURANT_POSITIVE_EXAMPLE },
                &format!("Last Restaurant Profile: {SLOT_PROFILE_SEQ}\n\nCurrent Restaurant Profile: {SLOT_RECOMMENDED}"),
            )
        }
        Domain::Movie => {
            let reason = if negative { "did not watch" } else { "watched" };
            format!(
                "Given the profiles of the watching history of this consumer {SLOT_PROFILE_SEQ}, can you provide a reason for why this consumer {reason} the following recommended movie with profile {SLOT_RECOMMENDED}? Answer with one sentence with the following format: The consumer {v} because..."
            )
        }
        Domain::Product => format!(
            "Provide a reason for why this consumer {v}, based on the provided profile of the past products the consumer purchased, and the profile of the current product. Answer with exactly one sentence in the following format: 'The consumer {v} because the consumer ... and the product ...'.\n\nPast Product Profiles: {SLOT_PROFILE_SEQ}\n\nCurrent Product Profile: {SLOT_RECOMMENDED}"
        ),
    }
}

fn variant_text(domain: Domain, polarity: Polarity) -> String {
    let history = history_noun(domain);
    let noun = domain.as_str();
    match polarity {
        Polarity::Aspect => format!(
            "Given the profiles of the {history} history of this consumer {SLOT_PROFILE_SEQ}, can you generate a series of aspect terms that represent the most important properties of the candidate {noun} with profile {SLOT_RECOMMENDED} that the consumer might consider?"
        ),
        Polarity::General => format!(
            "Given the profiles of the {history} history of this consumer {SLOT_PROFILE_SEQ}, can you infer whether this consumer would enjoy the following recommended {noun} with profile {SLOT_RECOMMENDED}, and explain why? Answer with one sentence that starts with: The consumer"
        ),
        Polarity::Summary => format!(
            "Given the profiles of the {history} history of this consumer {SLOT_PROFILE_SEQ}, can you provide a summary of the consumer preference of candidate {noun}s?"
        ),
        _ => unreachable!("explanation and profile polarities are handled elsewhere"),
    }
}

impl PromptTemplate {
    pub fn new(domain: Domain, polarity: Polarity) -> Self {
        let text = match polarity {
            Polarity::Profile => profile_text(domain),
            Polarity::Positive => explanation_text(domain, false),
            Polarity::Negative => explanation_text(domain, true),
            other => variant_text(domain, other),
        };
        PromptTemplate {
            domain,
            polarity,
            text,
        }
    }
}

pub fn build_profile_prompt(name: &str, domain: Domain) -> Result<String> {
    if name.trim().is_empty() {
        return Err(Error::validation("item name is empty"));
    }
    PromptTemplate::new(domain, Polarity::Profile).render(&[(SLOT_ITEM, name)])
}

/// `history_profiles` holds one entry per history slot, `None` for padding.
pub fn build_explanation_prompt(
    history_profiles: &[Option<&str>],
    candidate_profile: &str,
    polarity: Polarity,
    domain: Domain,
) -> Result<String> {
    if polarity == Polarity::Profile {
        return Err(Error::validation(
            "profile polarity takes an item name, not a history",
        ));
    }
    if candidate_profile.trim().is_empty() {
        return Err(Error::validation("candidate profile is empty"));
    }
    if history_profiles.is_empty() {
        return Err(Error::validation("history must hold at least one entry"));
    }
    let seq = history_profiles
        .iter()
        .map(|p| p.unwrap_or(NONE_PLACEHOLDER))
        .collect::<Vec<_>>()
        .join(HISTORY_SEPARATOR);
    PromptTemplate::new(domain, polarity).render(&[
        (SLOT_PROFILE_SEQ, &seq),
        (SLOT_RECOMMENDED, candidate_profile),
    ])
}

/// Recovers `(domain, polarity, profile_seq, recommended_profile)` from a
/// rendered explanation-style prompt.
pub fn parse_explanation_prompt(prompt: &str) -> Option<(Domain, Polarity, String, Option<String>)> {
    for domain in Domain::ALL {
        for polarity in Polarity::ALL {
            if polarity == Polarity::Profile {
                continue;
            }
            if let Some(values) = PromptTemplate::new(domain, polarity).parse(prompt) {
                let get = |slot: &str| {
                    values
                        .iter()
                        .find(|(s, _)| *s == slot)
                        .map(|(_, v)| v.to_string())
                };
                return Some((domain, polarity, get(SLOT_PROFILE_SEQ)?, get(SLOT_RECOMMENDED)));
            }
        }
    }
    None
}

/// Recovers `(domain, item name)` from a rendered profile prompt.
pub fn parse_profile_prompt(prompt: &str) -> Option<(Domain, String)> {
    Domain::ALL.into_iter().find_map(|d| {
        PromptTemplate::new(d, Polarity::Profile)
            .parse(prompt)
            .and_then(|v| v.first().map(|(_, name)| (d, name.to_string())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hotel_profile_prompt_carries_example() {
        let p = build_profile_prompt("Hilton Newark Airport", Domain::Hotel).unwrap();
        let out = p.split("[Example Output]\n\n").nth(1).unwrap();
        assert!(out.starts_with("Revitalize body, mind, and spirit"));
        assert!(p.contains("Create a succinct profile for a hotel based on its name."));
        assert!(p.ends_with("Hilton Newark Airport"));
    }

    #[test]
    fn restaurant_profile_prompt_carries_example() {
        let p = build_profile_prompt("Siam Thai Kitchen", Domain::Restaurant).unwrap();
        assert!(p.contains("[Example Input]\n\nThrill Korean Steak and Bar\n\n"));
        assert!(p.contains("over 20 meat options"));
    }

    #[test]
    fn empty_name_rejected() {
        assert!(build_profile_prompt("  ", Domain::Hotel).is_err());
    }

    #[test]
    fn negative_hotel_prompt_format() {
        let p = build_explanation_prompt(&[Some("A"), Some("B")], "C", Polarity::Negative, Domain::Hotel)
            .unwrap();
        assert!(p.contains("The consumer did not stay at this hotel because"));
        assert!(p.contains("Past Hotel Profiles: A | B\n\nCurrent Hotel Profile: C"));
    }

    #[test]
    fn positive_movie_prompt_format() {
        let p = build_explanation_prompt(&[Some("A")], "C", Polarity::Positive, Domain::Movie).unwrap();
        assert!(p.contains("The consumer watched this movie because"));
        assert!(p.starts_with("Given the profiles of the watching history of this consumer A,"));
    }

    #[test]
    fn every_domain_has_sentence_format_instruction() {
        for d in Domain::ALL {
            let pos = build_explanation_prompt(&[Some("h")], "c", Polarity::Positive, d).unwrap();
            let neg = build_explanation_prompt(&[Some("h")], "c", Polarity::Negative, d).unwrap();
            assert!(pos.contains(&format!("The consumer {} because", verb(d, false))), "{d}");
            assert!(neg.contains(&format!("The consumer {} because", verb(d, true))), "{d}");
        }
        let p = build_explanation_prompt(&[Some("h")], "c", Polarity::Positive, Domain::Product).unwrap();
        assert!(p.contains("Provide a reason for why this consumer purchased this product"));
    }

    #[test]
    fn all_padding_history_renders_none() {
        let h = [None; 5];
        let p = build_explanation_prompt(&h, "c", Polarity::Positive, Domain::Restaurant).unwrap();
        assert!(p.contains("Last Restaurant Profile: none | none | none | none | none\n\n"));
    }

    #[test]
    fn profile_polarity_rejected_for_explanations() {
        assert!(build_explanation_prompt(&[Some("h")], "c", Polarity::Profile, Domain::Hotel).is_err());
    }

    #[test]
    fn parse_inverts_render_for_every_template() {
        for d in Domain::ALL {
            for pol in Polarity::ALL {
                if pol == Polarity::Profile {
                    let p = build_profile_prompt("Some Name", d).unwrap();
                    assert_eq!(parse_profile_prompt(&p).unwrap(), (d, "Some Name".to_string()));
                    continue;
                }
                let p = build_explanation_prompt(&[Some("x y"), None], "cand", pol, d).unwrap();
                let (pd, pp, seq, cand) = parse_explanation_prompt(&p).unwrap();
                assert_eq!((pd, pp), (d, pol));
                assert_eq!(seq, "x y | none");
                if pol != Polarity::Summary {
                    assert_eq!(cand.as_deref(), Some("cand"));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fingerprints_differ_when_any_slot_differs(
            a in "[a-z ]{1,20}", b in "[a-z ]{1,20}", c in "[a-z]{1,20}", d in "[a-z]{1,20}",
        ) {
            prop_assume!(a.trim() != b.trim() || c != d);
            prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
            let p1 = build_explanation_prompt(&[Some(a.as_str())], &c, Polarity::Positive, Domain::Hotel).unwrap();
            let p2 = build_explanation_prompt(&[Some(b.as_str())], &d, Polarity::Positive, Domain::Hotel).unwrap();
            if a != b || c != d {
                prop_assert_ne!(super::super::fingerprint(&p1), super::super::fingerprint(&p2));
            }
            let n1 = build_explanation_prompt(&[Some(a.as_str())], &c, Polarity::Negative, Domain::Hotel).unwrap();
            prop_assert_ne!(super::super::fingerprint(&p1), super::super::fingerprint(&n1));
        }
    }
}
