//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use impression_eval::lexicon::{normalize_text, Category, Lexicon, NormalizedText};
use rand::seq::SliceRandom;
use rand::Rng;

/// Scan by trying every lexicon term at every position.
/// Returns (term, original start, original length).
pub fn brute_force_extract(
    terms: &[(String, Category)],
    text: &str,
) -> Vec<(String, usize, usize)> {
    let norm = NormalizedText::new(text);
    let chars = norm.chars();
    let term_chars: Vec<(Vec<char>, &String)> = terms
        .iter()
        .map(|(t, _)| normalize_text(t))
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().collect())
        .zip(terms.iter().map(|(t, _)| t))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut best: Option<&Vec<char>> = None;
        for (tc, _) in &term_chars {
            if i + tc.len() <= chars.len()
                && chars[i..i + tc.len()] == tc[..]
                && best.is_none_or(|b| tc.len() > b.len())
            {
                best = Some(tc);
            }
        }
        match best {
            Some(tc) => {
                let (start, len) = norm.original_span(i, i + tc.len());
                out.push((tc.iter().collect(), start, len));
                i += tc.len();
            }
            None => i += 1,
        }
    }
    out
}

const ALPHABET: &[char] = &['a', 'b', 'c', 'A', 'Ｂ', '肺', '癌', '结', '节', ' ', '，'];

pub fn random_string(rng: &mut impl Rng, len: usize, alphabet: &[char]) -> String {
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

/// A small random lexicon over a tiny alphabet so terms overlap often.
pub fn random_lexicon(rng: &mut impl Rng, max_terms: usize) -> Vec<(String, Category)> {
    let n = rng.gen_range(1..=max_terms);
    let letters = &ALPHABET[..ALPHABET.len() - 2];
    let cats = [
        Category::Anatomy,
        Category::Pathology,
        Category::Tracer,
        Category::General,
    ];
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=4);
            (random_string(rng, len, letters), *cats.choose(rng).unwrap())
        })
        .collect()
}

pub fn random_text(rng: &mut impl Rng, max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    random_string(rng, len, ALPHABET)
}

/// Terms as the lexicon stores them (normalized, first category wins).
pub fn lexicon_terms(lexicon: &Lexicon) -> Vec<(String, Category)> {
    lexicon.iter().map(|(t, c)| (t.to_string(), c)).collect()
}

pub fn set_of(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Coverage by counting members one at a time.
pub fn ecr_oracle(e_ref: &BTreeSet<String>, e_gen: &BTreeSet<String>) -> f64 {
    if e_ref.is_empty() {
        return 1.0;
    }
    let mut hit = 0;
    for e in e_ref {
        if e_gen.iter().any(|g| g == e) {
            hit += 1;
        }
    }
    hit as f64 / e_ref.len() as f64
}

pub fn uer_oracle(e_ref: &BTreeSet<String>, e_gen: &BTreeSet<String>) -> f64 {
    if e_gen.is_empty() {
        return 0.0;
    }
    let mut miss = 0;
    for g in e_gen {
        if !e_ref.iter().any(|e| e == g) {
            miss += 1;
        }
    }
    miss as f64 / e_gen.len() as f64
}

/// LCS length by enumerating every subsequence of `a`.
pub fn lcs_brute<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn is_subsequence<T: PartialEq>(sub: &[&T], seq: &[T]) -> bool {
        let mut it = seq.iter();
        sub.iter().all(|x| it.any(|y| y == *x))
    }
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&T> = (0..a.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| &a[i])
            .collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

/// Maximum matches and minimum chunks over every one-to-one exact alignment.
pub fn meteor_brute(cand: &[&str], refs: &[&str]) -> (usize, usize) {
    fn chunks(links: &[Option<usize>]) -> usize {
        let mut c = 0;
        for i in 0..links.len() {
            if let Some(j) = links[i] {
                if !(i > 0 && j > 0 && links[i - 1] == Some(j - 1)) {
                    c += 1;
                }
            }
        }
        c
    }
    fn go(
        i: usize,
        cand: &[&str],
        refs: &[&str],
        used: &mut Vec<bool>,
        links: &mut Vec<Option<usize>>,
        best: &mut (usize, usize),
    ) {
        if i == cand.len() {
            let m = links.iter().flatten().count();
            let c = chunks(links);
            if m > best.0 || (m == best.0 && c < best.1) {
                *best = (m, c);
            }
            return;
        }
        go(i + 1, cand, refs, used, links, best);
        for j in 0..refs.len() {
            if !used[j] && refs[j] == cand[i] {
                used[j] = true;
                links[i] = Some(j);
                go(i + 1, cand, refs, used, links, best);
                links[i] = None;
                used[j] = false;
            }
        }
    }
    let mut best = (0, usize::MAX);
    go(
        0,
        cand,
        refs,
        &mut vec![false; refs.len()],
        &mut vec![None; cand.len()],
        &mut best,
    );
    if best.0 == 0 {
        (0, 0)
    } else {
        best
    }
}

pub fn meteor_from_counts(m: usize, chunks: usize, c: usize, r: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let (m, c, r) = (m as f64, c as f64, r as f64);
    let p = m / c;
    let rc = m / r;
    let f = 10.0 * p * rc / (rc + 9.0 * p);
    f * (1.0 - 0.5 * (chunks as f64 / m).powi(3))
}

/// Textbook two-pass Pearson.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub type Handler = dyn Fn(usize, &str) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server answering each request via `handler(call_index, body)`.
pub struct StubServer {
    pub base_url: String,
    calls: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(handler: Arc<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let handler = handler.clone();
                let counter = counter.clone();
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut content_length = 0;
                    loop {
                        let mut line = String::new();
                        if reader.read_line(&mut line).unwrap_or(0) == 0 {
                            return;
                        }
                        let line = line.trim_end();
                        if line.is_empty() {
                            break;
                        }
                        if let Some((k, v)) = line.split_once(':') {
                            if k.eq_ignore_ascii_case("content-length") {
                                content_length = v.trim().parse().unwrap();
                            }
                        }
                    }
                    let mut body = vec![0; content_length];
                    reader.read_exact(&mut body).unwrap();
                    let idx = counter.fetch_add(1, Ordering::SeqCst);
                    let (status, reply) = handler(idx, &String::from_utf8(body).unwrap());
                    let mut stream = stream;
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                        reply.len()
                    );
                    let _ = stream.flush();
                });
            }
        });
        StubServer {
            base_url: format!("http://{addr}/v1"),
            calls,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

pub fn chat_reply(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
        .to_string()
}

/// The user prompt inside a chat-completion request body.
pub fn prompt_of(body: &str) -> String {
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    v["messages"][0]["content"].as_str().unwrap().to_string()
}

/// All sequences over {0,1,2} of length ≤ `max_len`, shortest first.
pub fn ternary_sequences(max_len: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = vec![vec![]];
    let mut start = 0;
    for _ in 0..max_len {
        let end = out.len();
        for i in start..end {
            for sym in 0..3u8 {
                let mut s = out[i].clone();
                s.push(sym);
                out.push(s);
            }
        }
        start = end;
    }
    out
}

fn ternary_index(seq: &[u8]) -> usize {
    let offset = (3usize.pow(seq.len() as u32) - 1) / 2;
    offset + seq.iter().fold(0usize, |acc, &s| acc * 3 + s as usize)
}

/// Compares `lcs` against subsequence enumeration on every pair of ternary
/// sequences up to `max_len`. Returns the number of disagreeing pairs.
///
/// For each sequence `s`, a bitset records which sequences contain `s` as a
/// subsequence (found by enumerating each sequence's subsequences). The LCS
/// of `(a, b)` is then the largest length of a subsequence of `a` whose
/// bitset contains `b`.
pub fn lcs_exhaustive_mismatches(
    max_len: usize,
    lcs: impl Fn(&[u8], &[u8]) -> usize + Sync,
) -> usize {
    use rayon::prelude::*;

    let all = ternary_sequences(max_len);
    let n = all.len();
    let words = n.div_ceil(64);
    let subsequences = |s: &[u8]| -> Vec<Vec<u8>> {
        (0u32..1 << s.len())
            .map(|mask| {
                (0..s.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| s[i])
                    .collect()
            })
            .collect()
    };
    let mut contained_in = vec![0u64; n * words];
    for (b_idx, b) in all.iter().enumerate() {
        for sub in subsequences(b) {
            let s = ternary_index(&sub);
            contained_in[s * words + b_idx / 64] |= 1 << (b_idx % 64);
        }
    }
    all.par_iter()
        .map(|a| {
            // union[L] = sequences containing some length-L subsequence of a
            let mut union = vec![vec![0u64; words]; a.len() + 1];
            let mut seen = vec![false; n];
            for sub in subsequences(a) {
                let s = ternary_index(&sub);
                if std::mem::replace(&mut seen[s], true) {
                    continue;
                }
                let row = &contained_in[s * words..(s + 1) * words];
                for (u, w) in union[sub.len()].iter_mut().zip(row) {
                    *u |= w;
                }
            }
            all.iter()
                .enumerate()
                .filter(|(b_idx, b)| {
                    let oracle = (1..=a.len())
                        .filter(|&l| union[l][b_idx / 64] >> (b_idx % 64) & 1 == 1)
                        .max()
                        .unwrap_or(0);
                    oracle != lcs(a, b)
                })
                .count()
        })
        .sum()
}
