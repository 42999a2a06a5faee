//! Brute-force coverage oracle.
//!
//! Independent of the coverage engine by construction: it re-implements URL
//! splitting, percent decoding, template matching and specificity from
//! scratch, enumerates every domain element directly from the spec, and
//! decides membership by scanning the whole log per element (quadratic,
//! deliberately naive).

use crate::coverage::Criterion;
use crate::executor::Interaction;
use crate::spec_model::{ApiSpec, OperationDescriptor, ParamLocation};

/// (criterion, numerator, denominator) for all eight criteria.
pub fn brute_force_counts(spec: &ApiSpec, log: &[Interaction]) -> Vec<(Criterion, u64, u64)> {
    let resolved: Vec<Resolved<'_>> = log.iter().filter_map(|i| resolve(spec, i)).collect();

    let mut out = Vec::new();

    // paths
    {
        let domain: Vec<&str> = spec.paths.iter().map(|p| p.as_str()).collect();
        let num = domain
            .iter()
            .filter(|p| resolved.iter().any(|r| r.op.path.as_str() == **p))
            .count();
        out.push((Criterion::Path, num as u64, domain.len() as u64));
    }

    // operations
    {
        let num = spec
            .operations
            .iter()
            .filter(|op| resolved.iter().any(|r| same_op(r.op, op)))
            .count();
        out.push((Criterion::Operation, num as u64, spec.operations.len() as u64));
    }

    // status classes
    {
        let mut domain: Vec<(&OperationDescriptor, u8)> = Vec::new();
        for op in &spec.operations {
            for code in op.documented_codes() {
                let class = (code / 100) as u8;
                if !domain.iter().any(|(o, c)| same_op(o, op) && *c == class) {
                    domain.push((op, class));
                }
            }
        }
        let num = domain
            .iter()
            .filter(|(op, class)| {
                resolved
                    .iter()
                    .any(|r| same_op(r.op, op) && (r.interaction.response_status / 100) as u8 == *class)
            })
            .count();
        out.push((Criterion::StatusClass, num as u64, domain.len() as u64));
    }

    // statuses
    {
        let mut domain: Vec<(&OperationDescriptor, u16)> = Vec::new();
        for op in &spec.operations {
            for code in op.documented_codes() {
                domain.push((op, code));
            }
        }
        let num = domain
            .iter()
            .filter(|(op, code)| {
                resolved
                    .iter()
                    .any(|r| same_op(r.op, op) && r.interaction.response_status == *code)
            })
            .count();
        out.push((Criterion::Status, num as u64, domain.len() as u64));
    }

    // response types
    {
        let mut domain: Vec<(&OperationDescriptor, &str)> = Vec::new();
        for op in &spec.operations {
            for media_types in op.documented_responses.values() {
                for mt in media_types {
                    if !domain.iter().any(|(o, m)| same_op(o, op) && *m == mt.as_str()) {
                        domain.push((op, mt.as_str()));
                    }
                }
            }
        }
        let num = domain
            .iter()
            .filter(|(op, mt)| {
                resolved.iter().any(|r| {
                    same_op(r.op, op) && r.interaction.response_media_type.as_deref() == Some(*mt)
                })
            })
            .count();
        out.push((Criterion::ResponseType, num as u64, domain.len() as u64));
    }

    // request types
    {
        let mut domain: Vec<(&OperationDescriptor, &str)> = Vec::new();
        for op in &spec.operations {
            for mt in &op.request_types {
                domain.push((op, mt.as_str()));
            }
        }
        let num = domain
            .iter()
            .filter(|(op, mt)| {
                resolved.iter().any(|r| {
                    same_op(r.op, op) && r.interaction.request_media_type.as_deref() == Some(*mt)
                })
            })
            .count();
        out.push((Criterion::RequestType, num as u64, domain.len() as u64));
    }

    // parameters and parameter values
    {
        let mut param_domain: Vec<(&OperationDescriptor, &str, ParamLocation)> = Vec::new();
        let mut value_domain: Vec<(&OperationDescriptor, &str, ParamLocation, &str)> = Vec::new();
        for op in &spec.operations {
            for p in &op.parameters {
                param_domain.push((op, p.name.as_str(), p.location));
                if let Some(values) = &p.enum_values {
                    for v in values {
                        value_domain.push((op, p.name.as_str(), p.location, v.as_str()));
                    }
                }
            }
        }
        let param_num = param_domain
            .iter()
            .filter(|(op, name, location)| {
                resolved
                    .iter()
                    .any(|r| same_op(r.op, op) && r.has_param(name, *location))
            })
            .count();
        out.push((
            Criterion::Parameter,
            param_num as u64,
            param_domain.len() as u64,
        ));
        let value_num = value_domain
            .iter()
            .filter(|(op, name, location, value)| {
                resolved
                    .iter()
                    .any(|r| same_op(r.op, op) && r.has_param_value(name, *location, value))
            })
            .count();
        out.push((
            Criterion::ParameterValue,
            value_num as u64,
            value_domain.len() as u64,
        ));
    }

    out
}

fn same_op(a: &OperationDescriptor, b: &OperationDescriptor) -> bool {
    a.path == b.path && a.method == b.method
}

struct Resolved<'a> {
    op: &'a OperationDescriptor,
    interaction: &'a Interaction,
    path_bindings: Vec<(String, String)>,
    query: Vec<(String, String)>,
}

impl Resolved<'_> {
    fn has_param(&self, name: &str, location: ParamLocation) -> bool {
        match location {
            ParamLocation::Query => self.query.iter().any(|(k, _)| k == name),
            ParamLocation::Header => self
                .interaction
                .request_headers
                .keys()
                .any(|k| k.eq_ignore_ascii_case(name) && !k.eq_ignore_ascii_case("cookie")),
            ParamLocation::Cookie => self.cookies().iter().any(|(k, _)| k == name),
            ParamLocation::Path => self.path_bindings.iter().any(|(k, _)| k == name),
        }
    }

    fn has_param_value(&self, name: &str, location: ParamLocation, value: &str) -> bool {
        match location {
            ParamLocation::Query => self.query.iter().any(|(k, v)| k == name && v == value),
            ParamLocation::Header => self
                .interaction
                .request_headers
                .iter()
                .any(|(k, v)| k.eq_ignore_ascii_case(name) && v == value),
            ParamLocation::Cookie => self.cookies().iter().any(|(k, v)| k == name && v == value),
            ParamLocation::Path => self
                .path_bindings
                .iter()
                .any(|(k, v)| k == name && v == value),
        }
    }

    fn cookies(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (k, v) in &self.interaction.request_headers {
            if k.eq_ignore_ascii_case("cookie") {
                for piece in v.split(';') {
                    let mut parts = piece.trim().splitn(2, '=');
                    if let Some(name) = parts.next() {
                        if !name.is_empty() {
                            out.push((name.to_string(), parts.next().unwrap_or("").to_string()));
                        }
                    }
                }
            }
        }
        out
    }
}

type Candidate<'a> = (usize, &'a OperationDescriptor, Vec<(String, String)>);

fn resolve<'a>(spec: &'a ApiSpec, interaction: &'a Interaction) -> Option<Resolved<'a>> {
    let (path, query_string) = split_url(&interaction.url)?;
    let path = strip_base(&spec.base_path, &path);

    let mut candidates: Vec<Candidate<'a>> = Vec::new();
    for op in &spec.operations {
        if !op.method.as_str().eq_ignore_ascii_case(&interaction.method) {
            continue;
        }
        if let Some(bindings) = naive_match(op.path.as_str(), &path) {
            let templ_count = op
                .path
                .as_str()
                .split('/')
                .filter(|s| s.starts_with('{') && s.ends_with('}') && s.len() > 2)
                .count();
            candidates.push((templ_count, op, bindings));
        }
    }
    let best = candidates.iter().map(|(n, _, _)| *n).min()?;
    let mut winners: Vec<_> = candidates.into_iter().filter(|(n, _, _)| *n == best).collect();
    if winners.len() != 1 {
        return None; // ambiguous ties are never guessed
    }
    let (_, op, path_bindings) = winners.pop().unwrap();

    let query = query_string
        .map(|q| {
            q.split('&')
                .filter(|piece| !piece.is_empty())
                .map(|piece| {
                    let mut parts = piece.splitn(2, '=');
                    (
                        decode(parts.next().unwrap_or("")),
                        decode(parts.next().unwrap_or("")),
                    )
                })
                .collect()
        })
        .unwrap_or_default();

    Some(Resolved {
        op,
        interaction,
        path_bindings,
        query,
    })
}

fn split_url(url: &str) -> Option<(String, Option<String>)> {
    let after_scheme = {
        let i = url.find("://")?;
        &url[i + 3..]
    };
    let path_start = after_scheme.find('/')?;
    let rest = &after_scheme[path_start..];
    let rest = rest.split('#').next().unwrap_or(rest);
    match rest.split_once('?') {
        Some((p, q)) => Some((p.to_string(), Some(q.to_string()))),
        None => Some((rest.to_string(), None)),
    }
}

fn strip_base(base: &str, path: &str) -> String {
    if !base.is_empty() && path.starts_with(base) {
        let rest = &path[base.len()..];
        if rest.is_empty() {
            return "/".to_string();
        }
        if rest.starts_with('/') {
            return rest.to_string();
        }
    }
    path.to_string()
}

fn naive_match(template: &str, concrete: &str) -> Option<Vec<(String, String)>> {
    let t: Vec<&str> = template.split('/').skip(1).collect();
    let concrete = concrete.trim_end_matches('/');
    let concrete = if concrete.is_empty() { "/" } else { concrete };
    let c: Vec<&str> = concrete.split('/').skip(1).collect();
    if t.len() != c.len() {
        return None;
    }
    let mut bindings = Vec::new();
    for (ts, cs) in t.iter().zip(c.iter()) {
        let decoded = decode(cs);
        if ts.starts_with('{') && ts.ends_with('}') && ts.len() > 2 {
            if decoded.is_empty() {
                return None;
            }
            bindings.push((ts[1..ts.len() - 1].to_string(), decoded));
        } else if *ts != decoded {
            return None;
        }
    }
    Some(bindings)
}

/// Minimal percent decoder (with `+` left alone, as in paths).
fn decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let hex = |b: u8| -> Option<u8> {
        match b {
            b'0'..=b'9' => Some(b - b'0'),
            b'a'..=b'f' => Some(b - b'a' + 10),
            b'A'..=b'F' => Some(b - b'A' + 10),
            _ => None,
        }
    };
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let (Some(h), Some(l)) = (hex(bytes[i + 1]), hex(bytes[i + 2])) {
                out.push(h * 16 + l);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}
