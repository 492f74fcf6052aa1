//! Regenerates the bundled `fixtures/news20` corpus.
//!
//! Vectors are synthetic: each story gets a random direction, each document
//! a noisy copy of it; each sentence concept likewise. Translated sentences
//! share a concept, unmatched ones get their own.
//!
//!     cargo run -p xdalign-cli --example make_fixture -- fixtures/news20

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;
use xdalign::corpus::{write_documents, Document};
use xdalign::embedding::store::encode;
use xdalign::sentences::{sentence_unit_id, RuleSegmenter, Segmenter};

const DIM: usize = 32;
const SEED: u64 = 20211109;

struct Side {
    id: &'static str,
    lang: &'static str,
    day: u32,
    title: &'static str,
    lead: &'static str,
    sentences: &'static [&'static str],
    /// Concept index of every sentence; `None` for an unmatched sentence.
    concepts: &'static [Option<usize>],
    /// Document noise scale around the story direction. Zero means a
    /// verbatim copy of the story's first side.
    noise: f32,
    meta: Option<&'static str>,
}

struct Story {
    key: &'static str,
    sides: Vec<Side>,
}

fn stories() -> Vec<Story> {
    vec![
        Story {
            key: "truck",
            sides: vec![
                Side {
                    id: "de-uri-truck",
                    lang: "de",
                    day: 9,
                    title: "LKW kreuzte Lieferwagen und stürzte dann ab",
                    lead: "Ein Lastwagen stürzte am Dienstag im Kanton Uri 300 Meter in die Tiefe. Der Fahrer überlebte schwer verletzt.",
                    sentences: &[
                        "Ein Lastwagen ist am Dienstagmorgen im Kanton Uri rund 300 Meter in die Tiefe gestürzt.",
                        "Der 66-jährige Chauffeur wurde dabei schwer verletzt und mit dem Helikopter ins Spital geflogen.",
                        "Gemäss der Kantonspolizei kreuzte der Lastwagen zuvor einen Lieferwagen auf der schmalen Bergstrasse.",
                        "Dabei geriet das schwere Fahrzeug über den Strassenrand hinaus.",
                        "Die Strasse blieb während der Bergungsarbeiten mehrere Stunden gesperrt.",
                        "SDA",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), Some(3), Some(4), Some(5)],
                    noise: 0.08,
                    meta: Some("Schweiz"),
                },
                Side {
                    id: "fr-uri-camion",
                    lang: "fr",
                    day: 9,
                    title: "Un camion chute de 300 mètres, le chauffeur survit",
                    lead: "Un poids lourd a quitté la route mardi dans le canton d'Uri. Son conducteur a été grièvement blessé.",
                    sentences: &[
                        "Un camion a chuté d'environ 300 mètres mardi matin dans le canton d'Uri.",
                        "Selon la police cantonale, il croisait une camionnette sur une route de montagne étroite.",
                        "Le chauffeur de 66 ans a été grièvement blessé et héliporté à l'hôpital.",
                        "La route est restée fermée plusieurs heures pendant les travaux de dégagement.",
                        "ATS",
                    ],
                    concepts: &[Some(0), Some(2), Some(1), Some(4), Some(5)],
                    noise: 0.08,
                    meta: Some("Suisse"),
                },
            ],
        },
        Story {
            key: "booster",
            sides: vec![
                Side {
                    id: "de-booster",
                    lang: "de",
                    day: 9,
                    title: "Bundesrat empfiehlt Auffrischimpfung ab 65",
                    lead: "Personen über 65 Jahre sollen eine dritte Dosis erhalten. Die Kantone starten nächste Woche.",
                    sentences: &[
                        "Der Bundesrat empfiehlt ab sofort eine Auffrischimpfung für alle Personen über 65 Jahre.",
                        "Die Impfungen sollen bereits in der kommenden Woche in den Kantonen beginnen.",
                        "Gesundheitsminister Alain Berset sprach von einem wichtigen Schritt vor dem Winter.",
                        "Kritik kam von mehreren Ärzteverbänden, die eine breitere Empfehlung fordern.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), Some(3)],
                    noise: 0.08,
                    meta: None,
                },
                Side {
                    id: "fr-rappel",
                    lang: "fr",
                    day: 9,
                    title: "Le Conseil fédéral recommande un rappel dès 65 ans",
                    lead: "Les personnes de plus de 65 ans devraient recevoir une troisième dose. Les cantons commencent la semaine prochaine.",
                    sentences: &[
                        "Le Conseil fédéral recommande désormais une dose de rappel pour toutes les personnes de plus de 65 ans.",
                        "Les vaccinations doivent commencer dès la semaine prochaine dans les cantons.",
                        "Pour le ministre de la santé Alain Berset, il s'agit d'une étape importante avant l'hiver.",
                        "Plusieurs associations de médecins réclament une recommandation plus large.",
                        "Les pharmacies pourront elles aussi administrer le rappel.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), Some(3), None],
                    noise: 0.08,
                    meta: None,
                },
            ],
        },
        Story {
            key: "glaciers",
            sides: vec![
                Side {
                    id: "de-gletscher",
                    lang: "de",
                    day: 9,
                    title: "Gletscher verlieren erneut stark an Volumen",
                    lead: "Die Schweizer Gletscher sind auch in diesem Jahr deutlich geschrumpft.",
                    sentences: &[
                        "Die Schweizer Gletscher haben in diesem Sommer erneut stark an Volumen verloren.",
                        "Messungen zeigen einen Rückgang von fast zwei Prozent gegenüber dem Vorjahr.",
                        "Besonders betroffen sind kleinere Gletscher in den Voralpen.",
                        "Die Forschenden rechnen damit, dass viele von ihnen bis 2050 verschwinden.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), Some(3)],
                    noise: 0.08,
                    meta: Some("Wissen"),
                },
                Side {
                    id: "fr-glaciers",
                    lang: "fr",
                    day: 9,
                    title: "Les glaciers suisses continuent de fondre",
                    lead: "Les glaciers du pays ont encore nettement reculé cette année.",
                    sentences: &[
                        "Les chercheurs estiment que beaucoup d'entre eux auront disparu d'ici 2050.",
                        "Les petits glaciers des Préalpes sont particulièrement touchés.",
                        "Les mesures montrent un recul de près de deux pour cent par rapport à l'année précédente.",
                        "Les glaciers suisses ont encore perdu beaucoup de volume cet été.",
                    ],
                    concepts: &[Some(3), Some(2), Some(1), Some(0)],
                    noise: 0.08,
                    meta: Some("Sciences"),
                },
            ],
        },
        Story {
            key: "football",
            sides: vec![
                Side {
                    id: "de-nati-wm",
                    lang: "de",
                    day: 9,
                    title: "Die Nati fährt an die WM nach Katar",
                    lead: "Mit einem klaren Sieg gegen Bulgarien sichert sich die Schweiz das WM-Ticket.",
                    sentences: &[
                        "Die Schweizer Nationalmannschaft hat sich direkt für die Weltmeisterschaft in Katar qualifiziert.",
                        "Im entscheidenden Spiel in Luzern gewann das Team mit 4:0 gegen Bulgarien.",
                        "Trainer Murat Yakin lobte die Geschlossenheit seiner Mannschaft.",
                        "Italien muss dagegen den Umweg über die Barrage nehmen.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), Some(3)],
                    noise: 0.08,
                    meta: Some("Sport"),
                },
                Side {
                    id: "fr-nati-mondial",
                    lang: "fr",
                    day: 9,
                    title: "La Suisse file au Mondial au Qatar",
                    lead: "Grâce à une large victoire contre la Bulgarie, la Suisse décroche son billet.",
                    sentences: &[
                        "L'équipe de Suisse s'est qualifiée directement pour la Coupe du monde au Qatar.",
                        "Lors du match décisif à Lucerne, elle s'est imposée 4-0 face à la Bulgarie.",
                        "L'Italie devra quant à elle passer par les barrages.",
                        "Le sélectionneur Murat Yakin a salué la cohésion de son équipe.",
                    ],
                    concepts: &[Some(0), Some(1), Some(3), Some(2)],
                    noise: 0.08,
                    meta: Some("Sport"),
                },
            ],
        },
        Story {
            key: "bridge",
            sides: vec![
                Side {
                    id: "de-velobruecke",
                    lang: "de",
                    day: 9,
                    title: "Zürich plant neue Velobrücke über die Limmat",
                    lead: "Der Stadtrat beantragt einen Kredit von zwölf Millionen Franken.",
                    sentences: &[
                        "Die Stadt Zürich plant eine neue Velobrücke über die Limmat.",
                        "Der Stadtrat hat dafür einen Kredit von zwölf Millionen Franken beantragt.",
                        "Der Bau könnte im Jahr 2024 beginnen.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2)],
                    noise: 0.08,
                    meta: None,
                },
                // scraped error page that happens to land near the bridge story
                Side {
                    id: "fr-erreur-404",
                    lang: "fr",
                    day: 9,
                    title: "Page introuvable",
                    lead: "Cet article n'est pas disponible.",
                    sentences: &["Veuillez réessayer plus tard ou revenir à la page d'accueil."],
                    concepts: &[None],
                    noise: 0.2,
                    meta: None,
                },
            ],
        },
        Story {
            key: "inflation",
            sides: vec![
                Side {
                    id: "de-teuerung",
                    lang: "de",
                    day: 10,
                    title: "Teuerung steigt auf höchsten Wert seit zehn Jahren",
                    lead: "Die Preise in der Schweiz sind im Oktober um 1,2 Prozent gestiegen.",
                    sentences: &[
                        "Die Teuerung in der Schweiz ist im Oktober auf 1,2 Prozent gestiegen.",
                        "Das ist der höchste Wert seit über zehn Jahren.",
                        "Vor allem Heizöl und Treibstoffe wurden deutlich teurer.",
                        "Die Nationalbank sieht vorerst keinen Handlungsbedarf.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), Some(3)],
                    noise: 0.08,
                    meta: Some("Wirtschaft"),
                },
                Side {
                    id: "fr-inflation",
                    lang: "fr",
                    day: 10,
                    title: "L'inflation atteint son plus haut niveau depuis dix ans",
                    lead: "Les prix ont augmenté de 1,2% en octobre en Suisse.",
                    sentences: &[
                        "L'inflation en Suisse a grimpé à 1,2% en octobre.",
                        "Il s'agit du niveau le plus élevé depuis plus de dix ans.",
                        "Le mazout et les carburants ont nettement renchéri.",
                        "La Banque nationale ne voit pour l'heure pas de raison d'agir.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), Some(3)],
                    noise: 0.08,
                    meta: Some("Economie"),
                },
            ],
        },
        Story {
            key: "rail",
            sides: vec![
                Side {
                    id: "de-sbb-italien",
                    lang: "de",
                    day: 10,
                    title: "Mehr direkte Züge nach Italien",
                    lead: "Ab dem Fahrplanwechsel fährt stündlich ein Zug von Zürich nach Mailand.",
                    sentences: &[
                        "Die SBB führen ab Dezember mehr direkte Verbindungen nach Italien ein.",
                        "Neu fährt ein Zug pro Stunde von Zürich nach Mailand.",
                        "Die Reisezeit verkürzt sich damit um rund zwanzig Minuten.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2)],
                    noise: 0.08,
                    meta: None,
                },
                Side {
                    id: "fr-cff-italie",
                    lang: "fr",
                    day: 10,
                    title: "Davantage de trains directs vers l'Italie",
                    lead: "Dès le changement d'horaire, un train par heure reliera Zurich à Milan.",
                    sentences: &[
                        "Les CFF introduiront dès décembre davantage de liaisons directes vers l'Italie.",
                        "Un train par heure reliera désormais Zurich à Milan.",
                        "Le temps de trajet sera réduit d'une vingtaine de minutes.",
                        "Keystone-ATS",
                    ],
                    concepts: &[Some(0), Some(1), Some(2), None],
                    noise: 0.08,
                    meta: None,
                },
            ],
        },
        Story {
            key: "drones",
            sides: vec![
                Side {
                    id: "de-drohnen",
                    lang: "de",
                    day: 10,
                    title: "Neue Regeln für Drohnen",
                    lead: "Der Bundesrat passt die Vorschriften an das europäische Recht an.",
                    sentences: &[
                        "Ab Januar gelten in der Schweiz neue Regeln für Drohnen.",
                        "Wer ein Gerät über 250 Gramm fliegt, muss sich künftig registrieren.",
                    ],
                    concepts: &[Some(0), Some(1)],
                    noise: 0.08,
                    meta: None,
                },
                // German copy filed under the French section
                Side {
                    id: "fr-drohnen-copie",
                    lang: "fr",
                    day: 10,
                    title: "Neue Regeln für Drohnen",
                    lead: "Der Bundesrat passt die Vorschriften an das europäische Recht an.",
                    sentences: &[
                        "Ab Januar gelten in der Schweiz neue Regeln für Drohnen.",
                        "Wer ein Gerät über 250 Gramm fliegt, muss sich künftig registrieren.",
                    ],
                    concepts: &[Some(0), Some(1)],
                    noise: 0.0,
                    meta: None,
                },
            ],
        },
        Story {
            key: "avalanche",
            sides: vec![
                Side {
                    id: "de-lawinen",
                    lang: "de",
                    day: 10,
                    title: "Erhebliche Lawinengefahr in den Alpen",
                    lead: "Nach den Schneefällen warnt der Lawinendienst vor Touren abseits der Pisten.",
                    sentences: &[
                        "Der Lawinendienst warnt vor erheblicher Lawinengefahr in den Alpen.",
                        "In den letzten zwei Tagen fiel verbreitet über ein halber Meter Neuschnee.",
                    ],
                    concepts: &[Some(0), Some(1)],
                    noise: 0.08,
                    meta: None,
                },
                // same story, published a day later
                Side {
                    id: "fr-avalanches",
                    lang: "fr",
                    day: 11,
                    title: "Danger marqué d'avalanches dans les Alpes",
                    lead: "Après les chutes de neige, le service des avalanches déconseille le hors-piste.",
                    sentences: &[
                        "Le service des avalanches met en garde contre un danger marqué dans les Alpes.",
                        "Plus d'un demi-mètre de neige fraîche est tombé en deux jours.",
                    ],
                    concepts: &[Some(0), Some(1)],
                    noise: 0.08,
                    meta: None,
                },
            ],
        },
        Story {
            key: "post",
            sides: vec![
                Side {
                    id: "de-post-preise",
                    lang: "de",
                    day: 11,
                    title: "Die Post erhöht die Briefpreise",
                    lead: "Ein A-Post-Brief kostet ab Januar mehr.",
                    sentences: &[
                        "Die Post erhöht im kommenden Jahr die Preise für A-Post-Briefe.",
                        "Ein Brief kostet neu 1,10 Franken statt bisher einen Franken.",
                        "Die Post begründet den Schritt mit sinkenden Briefmengen.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2)],
                    noise: 0.08,
                    meta: None,
                },
                Side {
                    id: "fr-poste-tarifs",
                    lang: "fr",
                    day: 11,
                    title: "La Poste augmente le prix des lettres",
                    lead: "Envoyer une lettre en courrier A coûtera plus cher dès janvier.",
                    sentences: &[
                        "La Poste augmentera l'an prochain le prix des lettres en courrier A dès janvier.",
                        "Une lettre coûtera désormais 1,10 franc au lieu d'un franc.",
                        "La Poste justifie cette hausse par la baisse du volume de lettres.",
                    ],
                    concepts: &[Some(0), Some(1), Some(2)],
                    noise: 0.08,
                    meta: None,
                },
            ],
        },
    ]
}

fn gaussian(rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..DIM).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn jitter(base: &[f32], scale: f32, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let noise = gaussian(rng);
    base.iter().zip(noise).map(|(b, n)| b + scale * n).collect()
}

fn main() {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "fixtures/news20".into()),
    );
    std::fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let seg = RuleSegmenter::default();

    let mut docs = Vec::new();
    let mut vectors: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    for story in stories() {
        let direction = unit(gaussian(&mut rng));
        let max_concept = story
            .sides
            .iter()
            .flat_map(|s| s.concepts.iter().flatten())
            .max()
            .map_or(0, |m| m + 1);
        let concepts: Vec<Vec<f32>> = (0..max_concept).map(|_| unit(gaussian(&mut rng))).collect();
        for side in &story.sides {
            assert_eq!(side.sentences.len(), side.concepts.len(), "{}", side.id);
            let content = side.sentences.join(" ");
            let split = seg.split(&content, side.lang);
            assert_eq!(
                split, side.sentences,
                "segmentation drifted for {}",
                side.id
            );

            docs.push(Document {
                id: side.id.into(),
                lang: side.lang.into(),
                publish_date: NaiveDate::from_ymd_opt(2021, 11, side.day).unwrap(),
                title: side.title.into(),
                lead: side.lead.into(),
                content,
                meta: side
                    .meta
                    .map(|r| json!({ "rubric": r, "story": story.key })),
            });
            // zero noise marks a verbatim copy of the story's first side
            if side.noise == 0.0 {
                let original = story.sides[0].id;
                let v = jitter(&vectors[original], 1e-4, &mut rng);
                vectors.insert(side.id.into(), v);
                for i in 0..side.sentences.len() {
                    let v = jitter(&vectors[&sentence_unit_id(original, i)], 1e-4, &mut rng);
                    vectors.insert(sentence_unit_id(side.id, i), v);
                }
                continue;
            }
            vectors.insert(side.id.into(), jitter(&direction, side.noise, &mut rng));
            for (i, c) in side.concepts.iter().enumerate() {
                let v = match c {
                    Some(k) => jitter(&concepts[*k], 0.1, &mut rng),
                    None => unit(gaussian(&mut rng)),
                };
                vectors.insert(sentence_unit_id(side.id, i), v);
            }
        }
    }
    docs.sort_by(|a, b| {
        a.publish_date
            .cmp(&b.publish_date)
            .then(a.lang.cmp(&b.lang))
            .then(a.id.cmp(&b.id))
    });
    write_documents(&out.join("documents.jsonl"), &docs).unwrap();

    let ids: Vec<String> = vectors.keys().cloned().collect();
    let data: Vec<f32> = vectors.values().flatten().copied().collect();
    std::fs::write(out.join("vectors.xdemb"), encode(&ids, DIM, &data)).unwrap();

    std::fs::write(
        out.join("gold.tsv"),
        "# validation pairs, 2021-11-09\n\
         de-uri-truck\tfr-uri-camion\n\
         de-booster\tfr-rappel\n\
         de-gletscher\tfr-glaciers\n\
         de-nati-wm\tfr-nati-mondial\n",
    )
    .unwrap();
    let cleanup = json!({
        "suspicious_score": 99.5,
        "same_language_check": true,
        "same_language_overlap": 0.9,
        "error_markers": ["Cet article n'est pas disponible", "Page introuvable", "Seite nicht gefunden"],
    });
    std::fs::write(
        out.join("cleanup.json"),
        serde_json::to_string_pretty(&cleanup).unwrap() + "\n",
    )
    .unwrap();
    let run = json!({
        "input": "documents.jsonl",
        "gold": "gold.tsv",
        "out_dir": "out",
        "langs": "de,fr",
        "provider": { "mode": "file", "vector_file": "vectors.xdemb", "batch_size": 8 },
        "strategy": "intersection",
        "threshold": 46.0,
        "top_k": 15000,
        "min_chars": 30,
        "analysis_threshold": 46.0,
        "cleanup_config": "cleanup.json",
        "dump_matrices": true,
        "token_counter": "whitespace",
    });
    std::fs::write(
        out.join("run.json"),
        serde_json::to_string_pretty(&run).unwrap() + "\n",
    )
    .unwrap();
    println!(
        "{} documents, {} vectors -> {}",
        docs.len(),
        ids.len(),
        out.display()
    );
}
