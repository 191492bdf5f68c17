//! Reference mean curves (rho in dB per iteration) for the four figure
//! presets, and their comparison with a run.

use std::f64::consts::PI;

use super::config::{ExperimentConfig, Figure};
use super::results::Aggregates;
use super::run::experiment_ids;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve {
    pub label: &'static str,
    pub sweep: f64,
    /// Iteration of `values[0]`.
    pub first_iteration: usize,
    pub values: &'static [f64],
}

impl Curve {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("non-empty curve")
    }

    pub fn at(&self, iteration: usize) -> Option<f64> {
        iteration.checked_sub(self.first_iteration).and_then(|i| self.values.get(i).copied())
    }
}

const FIG3: &[Curve] = &[
    Curve {
        label: "N = 15",
        sweep: 15.0,
        first_iteration: 1,
        values: &[
            13.5354271867519,
            16.9116654403304,
            18.4647480176534,
            19.1523197088495,
            19.4285318975964,
            19.5950942349931,
            19.7196750855644,
            19.8462422329314,
            19.9507852762801,
            20.0427333636593,
            20.1111570971269,
            20.1639056328959,
            20.2039456758194,
            20.2354240412474,
            20.2612204360739,
            20.2839927718631,
            20.3021090116942,
            20.3202510387536,
            20.3368502002593,
            20.3512350612259,
        ],
    },
    Curve {
        label: "N = 20",
        sweep: 20.0,
        first_iteration: 1,
        values: &[
            17.8199711440571,
            22.6311982442063,
            24.2060170614847,
            24.8369759175886,
            25.1661299033734,
            25.3499661775102,
            25.4722599172946,
            25.5494747097549,
            25.6100597742154,
            25.6729775312695,
            25.7183521505656,
            25.7508367505491,
            25.7778716586577,
            25.8003899197459,
            25.8221967432986,
            25.8432756148553,
            25.8668841660269,
            25.8962343826595,
            25.9278756568702,
            25.957267873152,
        ],
    },
    Curve {
        label: "N = 25",
        sweep: 25.0,
        first_iteration: 1,
        values: &[
            21.3844663653145,
            25.7741820272514,
            27.185305700083,
            27.7626222462423,
            28.0996121736981,
            28.2868858332746,
            28.4235586894906,
            28.5486785757202,
            28.6536985828223,
            28.7517835395533,
            28.8075421786011,
            28.9001678974966,
            28.9602109417152,
            29.008406235441,
            29.0473522344268,
            29.0785445566459,
            29.1050368521491,
            29.1271534768999,
            29.1460571059465,
            29.1625346793132,
        ],
    },
];

const FIG4: &[Curve] = &[
    Curve {
        label: "fault-free",
        sweep: 0.0,
        first_iteration: 1,
        values: &[
            13.5354271867519,
            16.9116654403304,
            18.4647480176534,
            19.1523197088495,
            19.4285318975964,
            19.5950942349931,
            19.7196750855644,
            19.8462422329314,
            19.9507852762801,
            20.0427333636593,
            20.1111570971269,
            20.1639056328959,
            20.2039456758194,
            20.2354240412474,
            20.2612204360739,
            20.2839927718631,
            20.3021090116942,
            20.3202510387536,
            20.3368502002593,
            20.3512350612259,
        ],
    },
    Curve {
        label: "kappa = pi/6",
        sweep: PI / 6.0,
        first_iteration: 1,
        values: &[
            11.5476482336029,
            15.3472662689613,
            17.1251756476995,
            17.9893660973642,
            18.3160646770812,
            18.4857361100662,
            18.5982418061471,
            18.6796389176951,
            18.7509657980936,
            18.8002298192046,
            18.842237589138,
            18.8661903919368,
            18.8914093185028,
            18.9099685881385,
            18.9247945821692,
            18.9369051900766,
            18.9470705718436,
            18.9590791191195,
            18.9691555083463,
            18.9770303062947,
        ],
    },
    Curve {
        label: "kappa = pi/4",
        sweep: PI / 4.0,
        first_iteration: 1,
        values: &[
            11.0638431556543,
            14.8323929543101,
            16.6201933419756,
            17.4958810682997,
            17.8276383081912,
            18.0007135530956,
            18.1159330773832,
            18.1996513723712,
            18.2729816610871,
            18.3237874132552,
            18.3664863878539,
            18.391608890272,
            18.4175524184054,
            18.4372117602512,
            18.4525820950241,
            18.4653594824341,
            18.475940182424,
            18.4886663839675,
            18.4991485228758,
            18.5071703685979,
        ],
    },
    Curve {
        label: "kappa = pi/3",
        sweep: PI / 3.0,
        first_iteration: 1,
        values: &[
            10.3635867372387,
            14.0961639961451,
            15.8960346786176,
            16.7845541630835,
            17.121195103854,
            17.2973967082243,
            17.4149837219458,
            17.5008742835009,
            17.5760828653267,
            17.6284395611047,
            17.6717582036518,
            17.6982058846654,
            17.7248255745046,
            17.7456635545835,
            17.7615742541392,
            17.775086027307,
            17.7861083238967,
            17.7996140082948,
            17.8104983640199,
            17.818654425849,
        ],
    },
];

const FIG5: &[Curve] = &[
    Curve {
        label: "gamma = 2",
        sweep: 2.0,
        first_iteration: 0,
        values: &[
            20.3512350612259,
            -19.0909742388625,
            -19.901177553508,
            -20.6792522745201,
            -21.074952189253,
            -21.31576798982,
            -21.4343971207191,
            -21.532013174406,
            -21.5615511438736,
            -21.5173888463332,
            -21.575232361849,
            -21.5877496724961,
            -21.5828176194497,
            -21.5602010908665,
            -21.5843248648436,
            -21.611555921998,
        ],
    },
    Curve {
        label: "gamma = 1",
        sweep: 1.0,
        first_iteration: 0,
        values: &[
            20.3512350612259,
            -19.2051652452021,
            -20.2671375914841,
            -21.2668839676259,
            -21.7974545804327,
            -22.1799706431892,
            -22.4681819865164,
            -22.6386815388103,
            -22.7519056877684,
            -22.831832714751,
            -22.8893097429176,
            -22.9326203395084,
            -22.960544077548,
            -22.9730271878295,
            -22.9939187140465,
            -23.0100434323731,
        ],
    },
    Curve {
        label: "gamma = 0.5",
        sweep: 0.5,
        first_iteration: 0,
        values: &[
            20.3512350612259,
            -20.9713611090405,
            -22.8731491804407,
            -23.2706766432197,
            -23.7139450253272,
            -23.9321306658283,
            -21.4838275493661,
            -23.5637994827045,
            -23.985082645414,
            -23.9512360729153,
            -23.9564039566349,
            -23.9971045881675,
            -24.044484404744,
            -24.0795917335433,
            -24.0997810274049,
            -24.11290227957,
        ],
    },
];

const FIG6: &[Curve] = &[
    Curve {
        label: "fault-free",
        sweep: 0.0,
        first_iteration: 0,
        values: &[
            21.534325498387,
            -13.7222661726692,
            -15.7684309130773,
            -17.2781379859359,
            -19.363616811301,
            -20.6602652795105,
            -21.5382520244036,
            -22.1244901185678,
            -22.5290107754833,
            -22.8076652795173,
            -23.0040306921921,
            -23.145116859995,
            -23.2480326083796,
            -23.3243090691457,
            -23.3814611971143,
            -23.4247657658117,
        ],
    },
    Curve {
        label: "kappa = pi/6",
        sweep: PI / 6.0,
        first_iteration: 0,
        values: &[
            21.534325498387,
            -10.6502310099002,
            -11.7877500525999,
            -12.5626448657949,
            -13.2673111348284,
            -13.7357030200818,
            -13.9576465959529,
            -13.9179253278522,
            -13.8990192776728,
            -13.9103413603583,
            -13.828379410316,
            -13.6016361984903,
            -13.3998611740217,
            -13.4698646796572,
            -13.5110895874142,
            -13.5295468090134,
        ],
    },
    Curve {
        label: "kappa = pi/4",
        sweep: PI / 4.0,
        first_iteration: 0,
        values: &[
            21.534325498387,
            -8.75091129112306,
            -9.64038192908278,
            -10.2521107482333,
            -10.7615181733057,
            -11.0774826506681,
            -11.2086627487925,
            -11.1229265710289,
            -11.0772776828486,
            -11.0693734028118,
            -10.9951237906602,
            -10.8150271168596,
            -10.6498076365965,
            -10.6913978922527,
            -10.7153711664677,
            -10.7255549028569,
        ],
    },
    Curve {
        label: "kappa = pi/3",
        sweep: PI / 3.0,
        first_iteration: 0,
        values: &[
            21.534325498387,
            -6.94361057887473,
            -7.70086581197734,
            -8.21411229730922,
            -8.59842932516605,
            -8.82254168936919,
            -8.90518978216438,
            -8.80590347632289,
            -8.75106153800353,
            -8.7352776778315,
            -8.6698720102066,
            -8.52277996443392,
            -8.38417610654967,
            -8.40998479708074,
            -8.4243256433684,
            -8.42984431053126,
        ],
    },
];

pub fn curves(figure: Figure) -> &'static [Curve] {
    match figure {
        Figure::Fig3 => FIG3,
        Figure::Fig4 => FIG4,
        Figure::Fig5 => FIG5,
        Figure::Fig6 => FIG6,
    }
}

/// Final mean of a run against the reference final.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub label: &'static str,
    pub sweep: f64,
    pub reference_db: f64,
    pub measured_db: Option<f64>,
}

impl Comparison {
    pub fn difference_db(&self) -> Option<f64> {
        self.measured_db.map(|m| m - self.reference_db)
    }
}

/// Compares the final value of every reference curve with the matching
/// curve of `agg`; the attack curve is used for attack pipelines.
pub fn compare(figure: Figure, cfg: &ExperimentConfig, agg: &Aggregates) -> Vec<Comparison> {
    let ids = experiment_ids(cfg);
    let exp = ids.last().expect("at least one curve");
    curves(figure)
        .iter()
        .map(|c| {
            let measured = agg
                .finals()
                .into_iter()
                .find(|p| &p.experiment == exp && p.sweep.is_some_and(|s| (s - c.sweep).abs() < 1e-12))
                .map(|p| p.mean_rho_db);
            Comparison {
                label: c.label,
                sweep: c.sweep,
                reference_db: c.final_value(),
                measured_db: measured,
            }
        })
        .collect()
}
