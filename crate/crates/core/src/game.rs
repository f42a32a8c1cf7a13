//! Headway and lane-change utilities and the finite two-player Stackelberg
//! solution used by every lane game.
//!
//! All utilities are lengths in meters, so positive and negative parts
//! combine without scaling.

use std::fmt;

use crate::driver::DriverProfile;

/// One player's move: cross into the contested lane ("left" for a merge), or
/// keep going straight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left,
    Straight,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Left, Action::Straight];

    fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Straight => 1,
        }
    }

    /// Order used to break ties: staying is safer than crossing a lane line.
    fn safety_rank(self) -> u8 {
        match self {
            Action::Straight => 0,
            Action::Left => 1,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Left => "L",
            Action::Straight => "S",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionPair {
    pub leader: Action,
    pub follower: Action,
}

impl ActionPair {
    pub fn new(leader: Action, follower: Action) -> Self {
        Self { leader, follower }
    }
}

/// Leader and follower utilities over the 2×2 joint action space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PayoffBimatrix {
    leader: [[f64; 2]; 2],
    follower: [[f64; 2]; 2],
}

impl PayoffBimatrix {
    pub fn from_fn(mut f: impl FnMut(ActionPair) -> (f64, f64)) -> Self {
        let mut m = Self::default();
        for l in Action::ALL {
            for r in Action::ALL {
                let (u1, u2) = f(ActionPair::new(l, r));
                m.leader[l.index()][r.index()] = u1;
                m.follower[l.index()][r.index()] = u2;
            }
        }
        m
    }

    pub fn leader(&self, pair: ActionPair) -> f64 {
        self.leader[pair.leader.index()][pair.follower.index()]
    }

    pub fn follower(&self, pair: ActionPair) -> f64 {
        self.follower[pair.leader.index()][pair.follower.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.leader.iter().chain(&self.follower).flatten().all(|v| v.is_finite())
    }

    /// Follower's optimal reaction set to the leader's `action`.
    pub fn best_responses(&self, action: Action) -> Vec<Action> {
        let best = Action::ALL
            .iter()
            .map(|&r| self.follower(ActionPair::new(action, r)))
            .fold(f64::NEG_INFINITY, f64::max);
        Action::ALL
            .into_iter()
            .filter(|&r| self.follower(ActionPair::new(action, r)) >= best)
            .collect()
    }

    /// Leader's worst-case utility over the follower's reaction set to
    /// `leader`, with the follower move that attains it.
    pub fn secure_value(&self, leader: Action) -> (f64, Action) {
        let mut responses = self.best_responses(leader);
        responses.sort_by_key(|a| a.safety_rank());
        let mut worst = (f64::INFINITY, Action::Straight);
        for r in responses {
            let u = self.leader(ActionPair::new(leader, r));
            if u < worst.0 {
                worst = (u, r);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackelbergSolution {
    pub actions: ActionPair,
    /// The leader's secure (worst case over the follower's reaction set) value.
    pub leader_value: f64,
    pub follower_value: f64,
}

/// Leader maximizes its worst-case utility over the follower's reaction set.
///
/// Within a reaction set the follower move reported is the one that is worst
/// for the leader. Remaining ties go to [`Action::Straight`] on both sides.
pub fn solve_stackelberg(bimatrix: &PayoffBimatrix) -> StackelbergSolution {
    let mut order = Action::ALL;
    order.sort_by_key(|a| a.safety_rank());
    let mut best: Option<(f64, ActionPair)> = None;
    for leader in order {
        let (value, follower) = bimatrix.secure_value(leader);
        if best.is_none_or(|(v, _)| value > v) {
            best = Some((value, ActionPair::new(leader, follower)));
        }
    }
    let (leader_value, actions) = best.expect("action set is non-empty");
    StackelbergSolution {
        actions,
        leader_value,
        follower_value: bimatrix.follower(actions),
    }
}

/// Positive utility of having `d_r` meters of headway; saturates at α·d_v.
pub fn headway_utility(d_r: f64, profile: &DriverProfile) -> f64 {
    d_r.min(profile.headway_cap())
}

/// Cost of entering the adjacent lane ahead of a follower `d_r` meters back
/// closing at `v_r` (follower speed minus ego speed).
pub fn merge_cost_left(d_r: f64, v_r: f64, profile: &DriverProfile) -> f64 {
    profile.sufficient_distance + v_r * profile.prediction_time - d_r
}

/// Cost of staying in the current lane; only a merging vehicle pays it.
pub fn merge_cost_stay(d_e: f64, ego_speed: f64, profile: &DriverProfile, is_merging: bool) -> f64 {
    if is_merging {
        profile.sufficient_distance + ego_speed * profile.prediction_time - d_e
    } else {
        0.0
    }
}

pub fn combine(u_pos: f64, u_neg: f64) -> f64 {
    u_pos - u_neg
}
