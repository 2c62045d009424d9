//! A small handwritten corpus for examples, tests, and smoke runs.

use crate::corpus::{Corpus, Document, Split};

const SPACE: &[&str] = &[
    "The shuttle launch was delayed while engineers inspected the booster.",
    "Orbit insertion succeeded and the satellite deployed its solar panels.",
    "Astronauts on the station ran experiments in microgravity this week.",
    "The rocket engine test fired for four minutes on the stand.",
    "A lunar lander will carry instruments to study the moon surface.",
    "Telescope images reveal a distant galaxy and a bright nebula.",
    "Mission control tracked the probe as it passed the outer planets.",
    "The crew capsule splashed down after six months in orbit.",
];

const HOCKEY: &[&str] = &[
    "The goalie made forty saves and the team won in overtime.",
    "A power play goal in the third period tied the game.",
    "The defenseman was penalized for hooking and sat two minutes.",
    "Playoff hockey starts next week with the home team favored.",
    "The winger scored a hat trick and fans threw hats on the ice.",
    "Coaches shuffled the lines after a slow first period.",
    "The puck bounced off the post and the referee waved off the goal.",
    "Trade rumors follow the captain as the season nears its end.",
];

const COOKING: &[&str] = &[
    "Simmer the tomato sauce with garlic and basil for an hour.",
    "Knead the bread dough until smooth and let it rise overnight.",
    "Roast the vegetables with olive oil, salt, and rosemary.",
    "Whisk eggs and sugar, then fold in the flour for the cake.",
    "The soup recipe calls for onions, carrots, and a bay leaf.",
    "Sear the steak in a hot pan and rest it before slicing.",
    "Fresh pasta needs only flour, eggs, and patience.",
    "Season the stew and bake it slowly in the oven.",
];

/// Three classes (`cooking`, `hockey`, `space`) of eight documents each,
/// split across two providers per class.
pub fn space_and_sports() -> Corpus {
    let mut docs = Vec::new();
    for (class, texts) in [("space", SPACE), ("hockey", HOCKEY), ("cooking", COOKING)] {
        for (i, body) in texts.iter().enumerate() {
            let provider = format!("{class}-{}", if i % 2 == 0 { "a" } else { "b" });
            docs.push(Document::text(format!("{class}/{i}"), provider, class, *body));
        }
    }
    Corpus::new(docs, Split::Train).expect("sample corpus is valid")
}
