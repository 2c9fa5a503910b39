use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::datamodel::{CmpOp, Date};
use crate::error::{Error, Result};

const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC",
    "LIMIT", "INSERT", "INTO", "VALUES", "UPDATE", "SET", "DELETE", "LIKE", "AS", "NULL", "ON",
    "CREATE", "TABLE", "INDEX", "PRIMARY", "KEY", "JOIN",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    at: usize,
    end: usize,
    params: usize,
}

pub fn parse(text: &str) -> Result<Statement> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            pos: 0,
            message: "empty statement".into(),
        });
    }
    let mut p = Parser::new(text)?;
    let stmt = p.statement()?;
    p.eat(&Tok::Semi);
    p.expect_end()?;
    Ok(stmt)
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Parser> {
        Ok(Parser {
            toks: tokenize(text)?,
            at: 0,
            end: text.len(),
            params: 0,
        })
    }

    pub(crate) fn at_end(&self) -> bool {
        self.at >= self.toks.len()
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.pos)
    }

    pub(crate) fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.at + n).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|t| t.tok.clone());
        self.at += 1;
        t
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    pub(crate) fn expect_end(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.error("unexpected trailing input")
        }
    }

    pub(crate) fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w == kw)
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected {kw}"))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Word(w)) if !RESERVED.contains(&w.as_str()) => {
                let w = w.clone();
                self.at += 1;
                Ok(w)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn statement(&mut self) -> Result<Statement> {
        match self.peek() {
            Some(Tok::Word(w)) => match w.as_str() {
                "SELECT" => self.select().map(Statement::Select),
                "INSERT" => self.insert().map(Statement::Insert),
                "UPDATE" => self.update().map(Statement::Update),
                "DELETE" => self.delete().map(Statement::Delete),
                _ => self.error("expected SELECT, INSERT, UPDATE or DELETE"),
            },
            _ => self.error("expected SELECT, INSERT, UPDATE or DELETE"),
        }
    }

    fn select(&mut self) -> Result<Select> {
        self.keyword("SELECT")?;
        let mut items = vec![self.select_item()?];
        while self.eat(&Tok::Comma) {
            items.push(self.select_item()?);
        }
        self.keyword("FROM")?;
        let mut from = vec![self.table_ref()?];
        while self.eat(&Tok::Comma) {
            from.push(self.table_ref()?);
        }
        if self.peek_keyword("JOIN") {
            return self.error("JOIN syntax is not supported; list tables separated by commas");
        }
        let conditions = if self.eat_keyword("WHERE") {
            self.conditions()?
        } else {
            Vec::new()
        };
        let mut group_by = Vec::new();
        if self.eat_keyword("GROUP") {
            self.keyword("BY")?;
            group_by.push(self.column_name()?);
            while self.eat(&Tok::Comma) {
                group_by.push(self.column_name()?);
            }
        }
        let having = if self.eat_keyword("HAVING") {
            self.conditions()?
        } else {
            Vec::new()
        };
        let order_by = if self.eat_keyword("ORDER") {
            self.keyword("BY")?;
            let e = self.expr()?;
            let dir = if self.eat_keyword("DESC") {
                SortDir::Desc
            } else {
                self.eat_keyword("ASC");
                SortDir::Asc
            };
            if self.peek() == Some(&Tok::Comma) {
                return self.error("ORDER BY supports a single key");
            }
            Some((e, dir))
        } else {
            None
        };
        let limit = if self.eat_keyword("LIMIT") {
            Some(self.scalar()?)
        } else {
            None
        };
        Ok(Select {
            items,
            from,
            conditions,
            group_by,
            having,
            order_by,
            limit,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem> {
        if self.eat(&Tok::Star) {
            return Ok(SelectItem::Star);
        }
        let expr = self.expr()?;
        let alias = if self.eat_keyword("AS") {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> Result<TableRef> {
        let name = self.ident()?;
        let alias = if self.eat_keyword("AS")
            || matches!(self.peek(), Some(Tok::Word(w)) if !RESERVED.contains(&w.as_str()))
        {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(TableRef { name, alias })
    }

    fn column_name(&mut self) -> Result<ColumnName> {
        let first = self.ident()?;
        if self.eat(&Tok::Dot) {
            Ok(ColumnName {
                qualifier: Some(first),
                name: self.ident()?,
            })
        } else {
            Ok(ColumnName {
                qualifier: None,
                name: first,
            })
        }
    }

    fn agg_func(&self) -> Option<AggFunc> {
        let Some(Tok::Word(w)) = self.peek() else {
            return None;
        };
        if self.peek_at(1) != Some(&Tok::LParen) {
            return None;
        }
        Some(match w.as_str() {
            "COUNT" => AggFunc::Count,
            "SUM" => AggFunc::Sum,
            "AVG" => AggFunc::Avg,
            "MIN" => AggFunc::Min,
            "MAX" => AggFunc::Max,
            _ => return None,
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        if let Some(func) = self.agg_func() {
            self.at += 2;
            let arg = if self.eat(&Tok::Star) {
                if func != AggFunc::Count {
                    return self.error(format!("{func}(*) is not allowed"));
                }
                None
            } else {
                Some(self.column_name()?)
            };
            self.expect(&Tok::RParen, "')'")?;
            return Ok(Expr::Agg { func, arg });
        }
        if matches!(self.peek(), Some(Tok::Word(w)) if w.as_str() != "DATE" && RESERVED.contains(&w.as_str()))
        {
            return self.error("expected column");
        }
        Ok(Expr::Column(self.column_name()?))
    }

    fn conditions(&mut self) -> Result<Vec<Condition>> {
        let mut out = vec![self.condition()?];
        loop {
            if self.eat_keyword("AND") {
                out.push(self.condition()?);
            } else if self.peek_keyword("OR") {
                return Err(Error::Unsupported("OR in predicates; only conjunctions are supported".into()));
            } else {
                return Ok(out);
            }
        }
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek() {
            Some(Tok::Word(w)) if w == "NULL" => Ok(Term::Scalar(self.scalar()?)),
            Some(Tok::Word(w)) if w == "DATE" && matches!(self.peek_at(1), Some(Tok::Str(_))) => {
                Ok(Term::Scalar(self.scalar()?))
            }
            Some(Tok::Word(_)) => Ok(Term::Expr(self.expr()?)),
            _ => Ok(Term::Scalar(self.scalar()?)),
        }
    }

    fn condition(&mut self) -> Result<Condition> {
        if self.peek_keyword("NOT") {
            return Err(Error::Unsupported("NOT in predicates".into()));
        }
        let left = self.term()?;
        let op = match self.next() {
            Some(Tok::Eq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Ge) => CmpOp::Ge,
            Some(Tok::Word(w)) if w == "LIKE" => CmpOp::LikePrefix,
            _ => {
                self.at -= 1;
                return self.error("expected comparison operator");
            }
        };
        let right = self.term()?;
        Ok(Condition { left, op, right })
    }

    pub(crate) fn scalar(&mut self) -> Result<Scalar> {
        let negative = self.eat(&Tok::Minus);
        let lit = match self.next() {
            Some(Tok::Param) if !negative => {
                self.params += 1;
                return Ok(Scalar::Param(self.params - 1));
            }
            Some(Tok::Int(v)) => Literal::Int(if negative { -v } else { v }),
            Some(Tok::Float(v)) => Literal::Float(if negative { -v } else { v }),
            Some(Tok::Date(d)) if !negative => Literal::Date(d),
            Some(Tok::Str(s)) if !negative => Literal::Str(s),
            Some(Tok::Word(w)) if w == "NULL" && !negative => Literal::Null,
            Some(Tok::Word(w)) if w == "DATE" && !negative => match self.next() {
                Some(Tok::Str(s)) => match Date::parse(&s) {
                    Some(d) => Literal::Date(d),
                    None => {
                        self.at -= 1;
                        return self.error(format!("invalid date '{s}'"));
                    }
                },
                _ => {
                    self.at -= 1;
                    return self.error("expected date string after DATE");
                }
            },
            _ => {
                self.at -= 1;
                return self.error("expected literal or ?");
            }
        };
        Ok(Scalar::Lit(lit))
    }

    fn insert(&mut self) -> Result<Insert> {
        self.keyword("INSERT")?;
        self.keyword("INTO")?;
        let table = self.ident()?;
        let columns = if self.eat(&Tok::LParen) {
            let mut cols = vec![self.ident()?];
            while self.eat(&Tok::Comma) {
                cols.push(self.ident()?);
            }
            self.expect(&Tok::RParen, "')'")?;
            Some(cols)
        } else {
            None
        };
        self.keyword("VALUES")?;
        let mut rows = Vec::new();
        loop {
            self.expect(&Tok::LParen, "'('")?;
            let mut row = vec![self.scalar()?];
            while self.eat(&Tok::Comma) {
                row.push(self.scalar()?);
            }
            self.expect(&Tok::RParen, "')'")?;
            rows.push(row);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(Insert { table, columns, rows })
    }

    fn update(&mut self) -> Result<Update> {
        self.keyword("UPDATE")?;
        let table = self.ident()?;
        self.keyword("SET")?;
        let mut assignments = Vec::new();
        loop {
            let col = self.ident()?;
            self.expect(&Tok::Eq, "'='")?;
            assignments.push((col, self.scalar()?));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let conditions = if self.eat_keyword("WHERE") {
            self.conditions()?
        } else {
            Vec::new()
        };
        Ok(Update {
            table,
            assignments,
            conditions,
        })
    }

    fn delete(&mut self) -> Result<Delete> {
        self.keyword("DELETE")?;
        self.keyword("FROM")?;
        let table = self.ident()?;
        let conditions = if self.eat_keyword("WHERE") {
            self.conditions()?
        } else {
            Vec::new()
        };
        Ok(Delete { table, conditions })
    }

    pub(crate) fn int(&mut self) -> Result<i64> {
        match self.next() {
            Some(Tok::Int(v)) => Ok(v),
            _ => {
                self.at -= 1;
                self.error("expected integer")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORPUS: &[&str] = &[
        "SELECT COUNTRY, SUM(USER_ID) FROM USERS GROUP BY COUNTRY",
        "SELECT * FROM USERS U, ORDERS O WHERE U.USER_ID = O.USER_ID AND U.USERNAME = ? AND O.STATUS = 'OK'",
        "SELECT * FROM USERS U, ORDERS O, ITEMS I WHERE U.USER_ID = O.USER_ID AND O.ITEM_ID = I.ITEM_ID AND I.AVAILABLE < ?",
        "SELECT * FROM ORDERS O, ITEMS I WHERE O.ITEM_ID = I.ITEM_ID AND O.DATE > ? ORDER BY I.PRICE",
        "SELECT * FROM ITEMS I WHERE I.CATEGORY = ? ORDER BY I.PRICE",
        "SELECT NAME FROM USERS WHERE BIRTHDATE > 1980.01.01 ORDER BY NAME",
        "select name, account from users where account > 1000 order by name desc limit 10",
        "SELECT COUNT(*) AS N, AVG(X) FROM T WHERE Y LIKE 'ab%' AND Z <> -3 AND W >= -1.5 GROUP BY K HAVING COUNT(*) > ?",
        "SELECT A FROM T WHERE D = DATE '2011-06-01' AND E = NULL AND 5 < A",
        "INSERT INTO T VALUES (1, 'x', ?), (2, 'it''s', NULL)",
        "INSERT INTO T (A, B) VALUES (?, 2.5e10)",
        "UPDATE USERS SET ACCOUNT = 0, NAME = ? WHERE NAME = 'Nick Lee'",
        "DELETE FROM USERS WHERE ACCOUNT < 600",
        "DELETE FROM USERS",
    ];

    #[test]
    fn golden_corpus_round_trips() {
        for text in CORPUS {
            let once = parse(text).unwrap_or_else(|e| panic!("{text}: {e}"));
            let again = parse(&once.to_string()).unwrap_or_else(|e| panic!("{once}: {e}"));
            assert_eq!(once, again, "{text}");
        }
    }

    #[test]
    fn join_query_shape() {
        let Statement::Select(s) = parse(CORPUS[1]).unwrap() else {
            panic!()
        };
        assert_eq!(s.from.len(), 2);
        let joins = s
            .conditions
            .iter()
            .filter(|c| matches!((&c.left, &c.right), (Term::Expr(_), Term::Expr(_))))
            .count();
        assert_eq!(joins, 1);
        let params = s
            .conditions
            .iter()
            .filter(|c| matches!(c.right, Term::Scalar(Scalar::Param(_))))
            .count();
        assert_eq!(params, 1);
    }

    #[test]
    fn group_by_shape() {
        let Statement::Select(s) = parse(CORPUS[0]).unwrap() else {
            panic!()
        };
        assert_eq!(s.group_by.len(), 1);
        assert!(matches!(
            &s.items[1],
            SelectItem::Expr {
                expr: Expr::Agg { func: AggFunc::Sum, .. },
                ..
            }
        ));
    }

    #[test]
    fn params_are_numbered_in_text_order() {
        let Statement::Select(s) = parse("SELECT A FROM T WHERE A = ? AND B < ? LIMIT ?").unwrap() else {
            panic!()
        };
        assert_eq!(s.conditions[0].right, Term::Scalar(Scalar::Param(0)));
        assert_eq!(s.conditions[1].right, Term::Scalar(Scalar::Param(1)));
        assert_eq!(s.limit, Some(Scalar::Param(2)));
    }

    #[test]
    fn column_named_date_is_allowed() {
        assert!(parse("SELECT O.DATE FROM ORDERS O WHERE O.DATE > ?").is_ok());
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse("SELECT *"), Err(Error::Syntax { pos: 8, .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse("SELECT A FROM T WHERE A = 1 OR B = 2"), Err(Error::Unsupported(_))));
        assert!(parse("SELECT A FROM T ORDER BY A, B").is_err());
        assert!(parse("SELECT A FROM T WHERE").is_err());
        assert!(parse("SELECT SUM(*) FROM T").is_err());
        assert!(parse("SELECT A FROM T extra junk").is_err());
    }
}
