use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::generate::{generate_with_ids, DistributionSpec, ImageSample, ImageShape};
use crate::error::{Error, Result};
use crate::rng;

/// Member/non-member pools for one benchmark setup.
///
/// `members_val` and `members_test` are disjoint subsets of `train_set`;
/// non-members are fresh draws that never enter training.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSplit {
    pub train_set: Vec<ImageSample>,
    pub members_val: Vec<ImageSample>,
    pub nonmembers_val: Vec<ImageSample>,
    pub members_test: Vec<ImageSample>,
    pub nonmembers_test: Vec<ImageSample>,
    pub shape: ImageShape,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Train,
    MemberVal,
    NonmemberVal,
    MemberTest,
    NonmemberTest,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Train,
        Role::MemberVal,
        Role::NonmemberVal,
        Role::MemberTest,
        Role::NonmemberTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::MemberVal => "member_val",
            Role::NonmemberVal => "nonmember_val",
            Role::MemberTest => "member_test",
            Role::NonmemberTest => "nonmember_test",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// `train`, `val` or `test`.
    pub fn split_name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::MemberVal | Role::NonmemberVal => "val",
            Role::MemberTest | Role::NonmemberTest => "test",
        }
    }

    /// Membership label (1 = member) for evaluation roles.
    pub fn label(self) -> u8 {
        match self {
            Role::Train | Role::MemberVal | Role::MemberTest => 1,
            Role::NonmemberVal | Role::NonmemberTest => 0,
        }
    }
}

/// Which evaluation half a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSplit {
    Val,
    Test,
}

impl BenchmarkSplit {
    pub fn role_samples(&self, role: Role) -> &[ImageSample] {
        match role {
            Role::Train => &self.train_set,
            Role::MemberVal => &self.members_val,
            Role::NonmemberVal => &self.nonmembers_val,
            Role::MemberTest => &self.members_test,
            Role::NonmemberTest => &self.nonmembers_test,
        }
    }

    /// Validation then test samples, each tagged with label and split.
    pub fn eval_samples(&self) -> Vec<(&ImageSample, u8, EvalSplit)> {
        let mut out = Vec::new();
        for (role, split) in [
            (Role::MemberVal, EvalSplit::Val),
            (Role::NonmemberVal, EvalSplit::Val),
            (Role::MemberTest, EvalSplit::Test),
            (Role::NonmemberTest, EvalSplit::Test),
        ] {
            out.extend(self.role_samples(role).iter().map(|s| (s, role.label(), split)));
        }
        out
    }

    /// Every distinct sample: the training pool followed by the non-members.
    pub fn unique_samples(&self) -> Vec<&ImageSample> {
        self.train_set
            .iter()
            .chain(&self.nonmembers_val)
            .chain(&self.nonmembers_test)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let ids = |v: &[ImageSample]| v.iter().map(|s| s.id).collect::<HashSet<_>>();
        let train = ids(&self.train_set);
        if train.len() != self.train_set.len() {
            return Err(Error::contract("duplicate ids in training set"));
        }
        let mv = ids(&self.members_val);
        let mt = ids(&self.members_test);
        let nv = ids(&self.nonmembers_val);
        let nt = ids(&self.nonmembers_test);
        if !mv.is_subset(&train) || !mt.is_subset(&train) {
            return Err(Error::contract("members must come from the training set"));
        }
        if !nv.is_disjoint(&train) || !nt.is_disjoint(&train) {
            return Err(Error::contract("non-members overlap the training set"));
        }
        if !mv.is_disjoint(&mt) || !nv.is_disjoint(&nt) {
            return Err(Error::contract("validation and test lists overlap"));
        }
        if mv.len() != self.members_val.len()
            || mt.len() != self.members_test.len()
            || nv.len() != self.nonmembers_val.len()
            || nt.len() != self.nonmembers_test.len()
        {
            return Err(Error::contract("duplicate ids within an evaluation list"));
        }
        if self.members_val.len() != self.nonmembers_val.len()
            || self.members_test.len() != self.nonmembers_test.len()
        {
            return Err(Error::contract("member and non-member lists are unbalanced"));
        }
        Ok(())
    }
}

/// Draws a training pool from `member_spec`, carves disjoint validation and
/// test member lists out of it, and draws fresh non-members from
/// `nonmember_spec`. Training ids are `0..n_train`; non-member ids follow.
pub fn make_setup(
    member_spec: &DistributionSpec,
    nonmember_spec: &DistributionSpec,
    shape: ImageShape,
    n_train: usize,
    n_eval_per_side: usize,
    seed: u64,
) -> Result<BenchmarkSplit> {
    if n_eval_per_side == 0 {
        return Err(Error::config("need at least one evaluation sample per side"));
    }
    if n_train < 2 * n_eval_per_side {
        return Err(Error::config(format!(
            "n_train = {n_train} cannot supply {n_eval_per_side} validation and {n_eval_per_side} test members"
        )));
    }
    let member_seed = rng::derive_seed(seed, 1);
    let nonmember_seed = rng::derive_seed(seed, 2);
    let train_set = generate_with_ids(member_spec, shape, 0..n_train as u64, member_seed)?;

    let mut picks: Vec<usize> = (0..n_train).collect();
    picks.shuffle(&mut rng::stream(seed, rng::TAG_SPLIT));
    let take = |range: std::ops::Range<usize>| -> Vec<ImageSample> {
        let mut idx = picks[range].to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| train_set[i].clone()).collect()
    };
    let members_val = take(0..n_eval_per_side);
    let members_test = take(n_eval_per_side..2 * n_eval_per_side);

    let first = n_train as u64;
    let k = n_eval_per_side as u64;
    let nonmembers_val = generate_with_ids(nonmember_spec, shape, first..first + k, nonmember_seed)?;
    let nonmembers_test =
        generate_with_ids(nonmember_spec, shape, first + k..first + 2 * k, nonmember_seed)?;

    let split = BenchmarkSplit {
        train_set,
        members_val,
        nonmembers_val,
        members_test,
        nonmembers_test,
        shape,
        seed,
    };
    split.validate()?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GAUSSIAN_FIELD;

    #[test]
    fn smallest_setup_covers_training_pool() {
        let spec = DistributionSpec::new(GAUSSIAN_FIELD);
        let s = make_setup(&spec, &spec, ImageShape::default(), 4, 2, 5).unwrap();
        let mut all: Vec<u64> = s.members_val.iter().chain(&s.members_test).map(|x| x.id).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn insufficient_training_pool() {
        let spec = DistributionSpec::new(GAUSSIAN_FIELD);
        assert!(matches!(
            make_setup(&spec, &spec, ImageShape::default(), 3, 2, 5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn role_names_round_trip() {
        for r in Role::ALL {
            assert_eq!(Role::parse(r.as_str()), Some(r));
        }
        assert_eq!(Role::parse("member"), None);
    }
}
