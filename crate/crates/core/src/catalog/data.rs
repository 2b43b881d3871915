//! Exact coefficient tables, kept as decimal strings.

pub(crate) type Table = [[&'static str; 4]; 4];

#[derive(Debug)]
pub(crate) struct TripletData {
    pub name: &'static str,
    pub nodes: [(i64, i64); 4],
    pub order: (usize, usize),
    pub fsal: bool,
    pub a0: Table,
    pub k0: Table,
    pub a: Table,
    pub k: Table,
    pub r: Table,
    pub an: Table,
    pub kn: Table,
    pub rn: Table,
}

const Z: &str = "0";

const fn diag(d: [&'static str; 4]) -> Table {
    [[d[0], Z, Z, Z], [Z, d[1], Z, Z], [Z, Z, d[2], Z], [Z, Z, Z, d[3]]]
}

const fn last_column(col: [&'static str; 4]) -> Table {
    [[Z, Z, Z, col[0]], [Z, Z, Z, col[1]], [Z, Z, Z, col[2]], [Z, Z, Z, col[3]]]
}

const ZERO: Table = [[Z; 4]; 4];

pub(crate) static AP4O33PA: TripletData = TripletData {
    name: "AP4o33pa",
    nodes: [(46, 5253), (29, 51), (1723, 2193), (17131, 12189)],
    order: (3, 3),
    fsal: false,
    a0: [
        ["-1.157765450537458", "4.180419822183092", "-3.571237514138118", "0.4344668789817266"],
        ["9.320046415868424", "-20.43515251977805", "20.53668079758682", "-2.660420735071554"],
        ["-9.502446854904932", "18.14294953408145", "-17.88837560028214", "2.643706254438956"],
        ["1.573865446847084", "-2.968198110625862", "2.201646466132119", "0.1498151692184390"],
    ],
    k0: [
        ["0.1525423728813559", "0.06343283582089552", "-0.04424778761061947", Z],
        ["0.2455414494142291", "0.3479528534959272", "0.2643445483279409", Z],
        ["-0.2389119757586965", "0.3687279250113433", "-0.2354279614690257", Z],
        ["0.03447092342852595", "-0.05320115087852647", "0.03711064142489613", "0.2479535745634692"],
    ],
    a: [
        ["0.7073170731707317", Z, Z, Z],
        ["-1.458044769359054", "2.011111111111111", Z, Z],
        ["0.8963499143698150", "-3.446643123594083", "2.170212765957447", Z],
        ["0.08807733909162651", "0.3555507383436048", "-0.8914986166587666", "0.5675675675675676"],
    ],
    k: diag([
        "0.2240817025504534",
        "0.2911518627633785",
        "0.2558139534883721",
        "0.2289524811977960",
    ]),
    r: last_column([
        "-0.2105994034490964",
        "0.1876445792137739",
        "-0.1297946665997080",
        "0.1527494908350306",
    ]),
    an: [
        ["0.03570841538693515", "0.4969703797836259", Z, Z],
        ["2.797947998593283", "-2.717111089179658", "1.827587054105035", "-0.3120359279234260"],
        ["-3.797058467469895", "4.498208855806741", "-2.913725127809472", "0.8173416699480771"],
        ["0.4837073832344139", "0.1093148794369315", "-0.4021296652058669", "0.07527364129327442"],
    ],
    kn: [
        ["0.2323465386026342", "0.08709000303247828", Z, Z],
        ["0.0006578497520678987", "-0.2800336616814694", Z, Z],
        ["-0.0006400881985255662", "0.5062443715754399", "0.32694879378132385", Z],
        ["0.00009235381026342189", "-0.07304242875763006", Z, "0.01004801943170234"],
    ],
    rn: last_column([
        "-0.1751101070505921",
        "0.2296022411517165",
        "-0.5247365005443616",
        "-0.07622773831802632",
    ]),
};

pub(crate) static AP4O33PFS: TripletData = TripletData {
    name: "AP4o33pfs",
    nodes: [(0, 1), (9, 86), (321, 602), (1, 1)],
    order: (3, 3),
    fsal: true,
    a0: [
        ["1.333333333333333", Z, Z, Z],
        ["-2.789814648187671", "2.243282202070159", "0.06686328023669716", "0.01646570267735142"],
        ["4.349477807846901", "-6.391186028966211", "2.276667661951199", "-0.06058221663260115"],
        ["-6.567438826613935", "9.406667237260441", "-4.671899050533916", "1.788163545558252"],
    ],
    k0: diag([Z, "0.2868808051464541", "0.4845433642003949", "0.2814200916147642"]),
    a: [
        ["0.7857142857142857", Z, Z, Z],
        ["-2.028837530067695", "2.203900659027200", Z, Z],
        ["4.063000939519495", "-6.340099591541239", "2.287165301103365", Z],
        ["-6.494320028787459", "9.394962342878431", "-4.615533409449387", "1.744047031603003"],
    ],
    k: diag([Z, "0.2754665812532002", "0.4295774647887324", "0.2949559539580673"]),
    r: last_column([
        Z,
        "0.156340095159149050",
        "-0.0212049600240154176",
        "-0.135135135135135135",
    ]),
    an: [
        ["1", Z, Z, Z],
        ["-1.037159659693408", "0.4363577782952090", "0.6845553714934806", "-0.2064640160522880"],
        ["0.03605110452225963", "-0.5660510638564654", "-0.1074762596776216", "0.7596425122215622"],
        ["0.001108555171148741", "0.1296932855612564", "-0.5770791118158589", "0.4468215038307258"],
    ],
    kn: [
        ["0.3333333333333333", Z, Z, Z],
        ["-0.3406285072951739", "0.1264725806602174", Z, Z],
        ["0.1282327493289677", Z, "0.5627483658896584", Z],
        ["-0.03272942952658255", Z, Z, "0.1697266466479663"],
    ],
    rn: last_column([
        "0.0463093438915248733",
        "0.191797796516481359",
        "-0.286597642859776972",
        "0.1785714285714285754",
    ]),
};

pub(crate) static AP4O43P: TripletData = TripletData {
    name: "AP4o43p",
    nodes: [(4657, 46172), (43, 97), (3991, 6596), (21111803999, 23798723875)],
    order: (4, 3),
    fsal: false,
    a0: [
        ["7.666666666666667", "-7.952380952380952", "6.428571428571429", "-1.0"],
        ["-37.64573385789864", "46.51465022124085", "-35.34733224501487", "5.556742966495919"],
        ["38.90401308661976", "-51.03310294122830", "39.84674769118604", "-5.987622148721481"],
        ["-9.132039686863960", "14.19615134612322", "-13.42624214739033", "3.410910572594644"],
    ],
    k0: [
        ["0.2201309814534140", "-0.001685331083118719", "0.03214426130560293", Z],
        ["0.1111845986702137", "0.4311745541022918", "-0.1774967804652712", Z],
        ["-0.1188243074116737", "-0.009945644225626329", "0.2279954173163067", Z],
        ["0.02777498546842700", "0.002324777899894389", "-0.04434040826768050", "0.2883852220354272"],
    ],
    a: [
        ["2.080437513028435", Z, Z, Z],
        ["-6.582767809460944", "2.843481487726957", Z, Z],
        ["5.640064091163237", "-4.381563545251576", "2.010790683327275", Z],
        ["-1.344827586206897", "3.263399731279439", "-4.509045955975008", "1.980031390369082"],
    ],
    k: diag(["0.2523093948412364", "0.4504313304404388", "0.0", "0.2972592747183247"]),
    r: ZERO,
    an: [
        ["2.602941176470588", "0.09421300555614037", "-1.072906715212599", "0.6"],
        ["-9.770538838886514", "3.643517491998914", "4.765969638829557", "-3.172336041397070"],
        ["9.121758438719117", "-5.324324324324324", "-3.193548387096774", "3.514071174094508"],
        ["-2.137018032260198", "3.217404548657921", "-2.956254337680976", "1.067051202531710"],
    ],
    kn: [
        ["0.2752122060365109", Z, "0.03076923076923077", "0.06493506493506494"],
        ["-0.07088680624623493", "0.3735422712438619", "-0.1699040256986543", "-0.3585636905978095"],
        ["0.07575757575757576", Z, "0.2750926288014159", "0.3832012950339724"],
        ["-0.01770820812361161", Z, "-0.04244366487128950", "0.1921737961617600"],
    ],
    rn: ZERO,
};

pub(crate) static ALL: [&TripletData; 3] = [&AP4O33PA, &AP4O33PFS, &AP4O43P];
