use super::{Predicate, Rule, RuleKind, SignatureError};

/// Why a rule is not well formed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("{kind} rule cannot have a {predicate} head")]
    WrongHead { kind: RuleKind, predicate: Predicate },
    #[error("{predicate} is not allowed in the body of a {kind} rule")]
    ForbiddenBodyPredicate { kind: RuleKind, predicate: Predicate },
    #[error("missing SatC in CP body")]
    MissingSatC,
    #[error("SatC in NSP body without a HasNS literal")]
    SatCWithoutHasNS,
    #[error("missing SatNS in NSP body")]
    MissingSatNS,
    #[error("variable {0} appears only in the head")]
    UnboundHeadVariable(String),
    #[error("facts must be ground")]
    NonGroundFact,
    #[error("rule kind {declared} does not match its shape ({inferred})")]
    KindMismatch { declared: RuleKind, inferred: RuleKind },
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

/// Checks a rule against the CP / NSP / fact well-formedness conditions.
pub fn validate_rule(rule: &Rule) -> Result<(), ValidationError> {
    for lit in rule.literals() {
        lit.check_signature()?;
    }
    let inferred = Rule::infer_kind(&rule.head, &rule.body);
    match rule.kind {
        RuleKind::Fact => {
            if !rule.body.is_empty() {
                return Err(ValidationError::KindMismatch { declared: rule.kind, inferred });
            }
            if !rule.head.is_ground() {
                return Err(ValidationError::NonGroundFact);
            }
            return Ok(());
        }
        RuleKind::Cp => {
            if rule.head.predicate != Predicate::SatC {
                return Err(ValidationError::WrongHead { kind: rule.kind, predicate: rule.head.predicate });
            }
            for lit in &rule.body {
                if !matches!(lit.predicate, Predicate::SatC | Predicate::HasC) {
                    return Err(ValidationError::ForbiddenBodyPredicate {
                        kind: rule.kind,
                        predicate: lit.predicate,
                    });
                }
            }
            if !rule.body.is_empty() && !rule.body.iter().any(|l| l.predicate == Predicate::SatC) {
                return Err(ValidationError::MissingSatC);
            }
        }
        RuleKind::Nsp => {
            if rule.head.predicate != Predicate::SatNS {
                return Err(ValidationError::WrongHead { kind: rule.kind, predicate: rule.head.predicate });
            }
            for lit in &rule.body {
                if !matches!(lit.predicate, Predicate::SatC | Predicate::SatNS | Predicate::HasNS) {
                    return Err(ValidationError::ForbiddenBodyPredicate {
                        kind: rule.kind,
                        predicate: lit.predicate,
                    });
                }
            }
            let has = |p: Predicate| rule.body.iter().any(|l| l.predicate == p);
            if has(Predicate::SatC) && !has(Predicate::HasNS) {
                return Err(ValidationError::SatCWithoutHasNS);
            }
            if !rule.body.is_empty() && !has(Predicate::SatC) && !has(Predicate::SatNS) {
                return Err(ValidationError::MissingSatNS);
            }
        }
    }
    if !rule.body.is_empty() && inferred != rule.kind {
        return Err(ValidationError::KindMismatch { declared: rule.kind, inferred });
    }
    for var in rule.head.variables() {
        if !rule.body.iter().flat_map(|l| l.variables()).any(|v| v.name == var.name) {
            return Err(ValidationError::UnboundHeadVariable(var.name.clone()));
        }
    }
    Ok(())
}
