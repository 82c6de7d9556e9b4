use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Operator families used for corpus coverage statistics and template placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Arithmetic,
    LogExp,
    Trig,
    InvTrig,
    Hyperbolic,
    InvHyperbolic,
    Calculus,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Arithmetic,
        Category::LogExp,
        Category::Trig,
        Category::InvTrig,
        Category::Hyperbolic,
        Category::InvHyperbolic,
        Category::Calculus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Arithmetic => "arithmetic",
            Category::LogExp => "log-exp",
            Category::Trig => "trig",
            Category::InvTrig => "inv-trig",
            Category::Hyperbolic => "hyperbolic",
            Category::InvHyperbolic => "inv-hyperbolic",
            Category::Calculus => "calculus",
        }
    }
}

impl FromStr for Category {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Category::ALL.into_iter().find(|c| c.name() == s).ok_or(())
    }
}

macro_rules! operators {
    ($($variant:ident => $tok:literal, $arity:literal, $cat:ident;)*) => {
        /// A term-language operator. `exp` is not a separate operator: it is written `pow e u`.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Op {
            $($variant,)*
        }

        impl Op {
            pub const ALL: &'static [Op] = &[$(Op::$variant,)*];

            pub fn token(self) -> &'static str {
                match self {
                    $(Op::$variant => $tok,)*
                }
            }

            pub fn arity(self) -> usize {
                match self {
                    $(Op::$variant => $arity,)*
                }
            }

            pub fn category(self) -> Category {
                match self {
                    $(Op::$variant => Category::$cat,)*
                }
            }

            pub fn from_token(tok: &str) -> Option<Op> {
                match tok {
                    $($tok => Some(Op::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

operators! {
    Add => "+", 2, Arithmetic;
    Sub => "-", 2, Arithmetic;
    Mul => "*", 2, Arithmetic;
    Div => "/", 2, Arithmetic;
    Pow => "pow", 2, Arithmetic;
    Abs => "abs", 1, Arithmetic;
    Sqrt => "sqrt", 1, Arithmetic;
    Ln => "ln", 1, LogExp;
    Sin => "sin", 1, Trig;
    Cos => "cos", 1, Trig;
    Tan => "tan", 1, Trig;
    Csc => "csc", 1, Trig;
    Sec => "sec", 1, Trig;
    Cot => "cot", 1, Trig;
    Asin => "asin", 1, InvTrig;
    Acos => "acos", 1, InvTrig;
    Atan => "atan", 1, InvTrig;
    Acsc => "acsc", 1, InvTrig;
    Asec => "asec", 1, InvTrig;
    Acot => "acot", 1, InvTrig;
    Sinh => "sinh", 1, Hyperbolic;
    Cosh => "cosh", 1, Hyperbolic;
    Tanh => "tanh", 1, Hyperbolic;
    Csch => "csch", 1, Hyperbolic;
    Sech => "sech", 1, Hyperbolic;
    Coth => "coth", 1, Hyperbolic;
    Asinh => "asinh", 1, InvHyperbolic;
    Acosh => "acosh", 1, InvHyperbolic;
    Atanh => "atanh", 1, InvHyperbolic;
    Acsch => "acsch", 1, InvHyperbolic;
    Asech => "asech", 1, InvHyperbolic;
    Acoth => "acoth", 1, InvHyperbolic;
    Deriv => "d/dx", 1, Calculus;
}

impl Op {
    pub fn is_binary(self) -> bool {
        self.arity() == 2
    }

    /// Operators of the given category, in registry order.
    pub fn in_category(cat: Category) -> impl Iterator<Item = Op> {
        Op::ALL.iter().copied().filter(move |op| op.category() == cat)
    }

    /// Binary arithmetic operators substituted for `{aop}` placeholders.
    pub fn binary_arith() -> impl Iterator<Item = Op> {
        [Op::Add, Op::Sub, Op::Mul, Op::Div].into_iter()
    }

    /// Unary "functional" operators: everything unary except `d/dx`.
    pub fn unary_functions() -> impl Iterator<Item = Op> {
        Op::ALL.iter().copied().filter(|op| op.arity() == 1 && *op != Op::Deriv)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Number of operators counted for coverage: the registry plus `exp`, which the
/// term language spells as `pow e u`.
pub const COVERAGE_OPERATOR_COUNT: usize = 34;
